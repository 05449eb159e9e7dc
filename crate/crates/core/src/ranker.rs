//! Turning trained models into rankings of document lists.
//!
//! Pairwise models score a document by summing its pairwise scores against
//! every other document in the list. Pointwise models rank by their direct
//! predictions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::models::{NprmModel, TrainedModel};

/// A list of at least two distinct, featurized documents to rank.
#[derive(Debug, Clone)]
pub struct RankingInput<'a> {
    corpus: &'a Corpus,
    doc_ids: Vec<String>,
}

impl<'a> RankingInput<'a> {
    pub fn new(corpus: &'a Corpus, doc_ids: impl IntoIterator<Item = impl Into<String>>) -> Result<Self> {
        let mut doc_ids: Vec<String> = doc_ids.into_iter().map(Into::into).collect();
        let given = doc_ids.len();
        doc_ids.sort();
        doc_ids.dedup();
        if doc_ids.len() != given {
            return Err(Error::Config("ranking input contains duplicate doc_ids".into()));
        }
        if doc_ids.len() < 2 {
            return Err(Error::TooFewDocuments(doc_ids.len()));
        }
        for id in &doc_ids {
            corpus.vector(id)?;
        }
        Ok(RankingInput { corpus, doc_ids })
    }

    /// Every member of a slug.
    pub fn from_slug(corpus: &'a Corpus, slug_id: &str) -> Result<Self> {
        let slug = corpus
            .slug(slug_id)
            .ok_or_else(|| Error::Config(format!("unknown slug {slug_id}")))?;
        Self::new(corpus, slug.members.iter().cloned())
    }

    /// Doc ids in ascending order.
    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn corpus(&self) -> &Corpus {
        self.corpus
    }
}

/// Per-document scores and the induced order (score descending, then
/// doc_id ascending).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredRanking {
    pub scores: BTreeMap<String, f64>,
    pub order: Vec<String>,
}

impl ScoredRanking {
    pub fn score(&self, doc_id: &str) -> Option<f64> {
        self.scores.get(doc_id).copied()
    }
}

/// Sorts by score descending. Exact ties are kept as equal scores and
/// ordered by doc_id.
pub fn rank_by_scores(scores: BTreeMap<String, f64>) -> Result<ScoredRanking> {
    if scores.is_empty() {
        return Err(Error::TooFewDocuments(0));
    }
    if let Some((id, s)) = scores.iter().find(|(_, s)| !s.is_finite()) {
        return Err(Error::NonFinite(format!("score {s} for {id}")));
    }
    let mut order: Vec<String> = scores.keys().cloned().collect();
    // BTreeMap keys are already ascending, so a stable sort keeps doc_id order on ties.
    order.sort_by(|a, b| scores[b].total_cmp(&scores[a]));
    Ok(ScoredRanking { scores, order })
}

/// `score(a) = sum over b != a of pair_score(x_a, x_b)`, summed in doc_id order.
pub fn rank_pairwise(
    input: &RankingInput,
    mut pair_score: impl FnMut(&[f64], &[f64]) -> Result<f64>,
) -> Result<ScoredRanking> {
    let vectors = input
        .doc_ids
        .iter()
        .map(|id| input.corpus.vector(id))
        .collect::<Result<Vec<_>>>()?;
    let mut scores = BTreeMap::new();
    for (a, id) in input.doc_ids.iter().enumerate() {
        let mut total = 0.0;
        for (b, xb) in vectors.iter().enumerate() {
            if a != b {
                total += pair_score(vectors[a], xb)?;
            }
        }
        scores.insert(id.clone(), total);
    }
    rank_by_scores(scores)
}

/// Aggregates the first softmax component, the estimate that `a` is harder
/// than `b`. Each score lies in `(0, S - 1)` for a list of size `S`.
pub fn rank_nprm(model: &NprmModel, input: &RankingInput) -> Result<ScoredRanking> {
    rank_pairwise(input, |xa, xb| Ok(model.forward(xa, xb)?.s1))
}

/// Ranks with whatever model family was trained. The classifier ranks by its
/// argmax level, so ties are possible.
pub fn rank_with_model(model: &TrainedModel, input: &RankingInput) -> Result<ScoredRanking> {
    match model {
        TrainedModel::Nprm(m) => rank_nprm(m, input),
        TrainedModel::Ranksvm(p) => rank_pairwise(input, |xa, xb| p.decision(xa, xb)),
        _ => {
            let scores = input
                .doc_ids
                .iter()
                .map(|id| Ok((id.clone(), predict_level(model, input.corpus.vector(id)?)?)))
                .collect::<Result<BTreeMap<_, _>>>()?;
            rank_by_scores(scores)
        }
    }
}

/// Pointwise level prediction; `None`-like error for pairwise families.
pub fn predict_level(model: &TrainedModel, x: &[f64]) -> Result<f64> {
    match model {
        TrainedModel::Ols(p) => p.predict(x),
        TrainedModel::MlpRegressor(m) => m.predict(x),
        TrainedModel::Classifier(m) => m.predict_level(x),
        TrainedModel::Nprm(_) | TrainedModel::Ranksvm(_) => Err(Error::Config(format!(
            "{} does not predict levels",
            model.family()
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Document;
    use crate::models::{Combiner, MlpParams};

    fn corpus(vectors: &[(&str, Vec<f64>)]) -> Corpus {
        Corpus::from_documents(
            vectors
                .iter()
                .map(|(id, v)| Document {
                    doc_id: id.to_string(),
                    slug_id: "s".into(),
                    level: 0.0,
                    lang: "en".into(),
                    text: None,
                    vector: Some(v.clone()),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn rank_by_scores_orders_and_keeps_ties() {
        let r = rank_by_scores(BTreeMap::from([("a".into(), 2.0), ("b".into(), 1.0), ("c".into(), 3.0)])).unwrap();
        assert_eq!(r.order, vec!["c", "a", "b"]);

        let r = rank_by_scores(BTreeMap::from([("b".into(), 1.0), ("a".into(), 1.0)])).unwrap();
        assert_eq!(r.order, vec!["a", "b"]);
        assert_eq!(r.scores["a"], r.scores["b"]);

        assert!(rank_by_scores(BTreeMap::from([("a".into(), f64::NAN)])).is_err());
        assert!(rank_by_scores(BTreeMap::new()).is_err());
    }

    #[test]
    fn two_documents_use_one_comparison_each_way() {
        let c = corpus(&[("a", vec![1.0]), ("b", vec![0.0])]);
        let input = RankingInput::new(&c, ["b", "a"]).unwrap();
        let r = rank_pairwise(&input, |xa, _| Ok(if xa[0] > 0.5 { 0.9 } else { 0.2 })).unwrap();
        assert_eq!(r.scores["a"], 0.9);
        assert_eq!(r.scores["b"], 0.2);
        assert_eq!(r.order, vec!["a", "b"]);
    }

    #[test]
    fn identical_vectors_tie_by_doc_id() {
        let c = corpus(&[("c", vec![1.0, 2.0]), ("a", vec![1.0, 2.0]), ("b", vec![1.0, 2.0])]);
        let model = NprmModel {
            params: MlpParams::init(6, 8, 2, &mut crate::rng::rng_for(3, "t")),
            combiner: Combiner::ConcatDiff,
        };
        let r = rank_nprm(&model, &RankingInput::new(&c, ["c", "b", "a"]).unwrap()).unwrap();
        assert_eq!(r.order, vec!["a", "b", "c"]);
        let s: Vec<f64> = r.scores.values().copied().collect();
        assert!(s.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn input_validation() {
        let c = corpus(&[("a", vec![1.0]), ("b", vec![0.0])]);
        assert!(matches!(RankingInput::new(&c, ["a"]), Err(Error::TooFewDocuments(1))));
        assert!(RankingInput::new(&c, ["a", "a"]).is_err());
        assert!(RankingInput::new(&c, ["a", "zzz"]).is_err());
        assert_eq!(RankingInput::from_slug(&c, "s").unwrap().len(), 2);
    }
}
