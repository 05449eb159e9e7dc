//! Neural pairwise ranking model.
//!
//! A pair `(x_i, x_j)` is encoded by a combiner, passed through one hidden
//! ReLU layer and a two-logit output layer, and normalized with softmax.
//! The first component estimates `P(level_i > level_j)`.

use serde::{Deserialize, Serialize};

use super::mlp::{softmax, MlpParams};
use super::{sgd, Objective, TrainConfig, TrainLog};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pairs::{PairExample, PairSet};
use crate::rng::rng_for;

/// How two document vectors are joined into one pair input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Combiner {
    /// `[x_i ; x_j ; x_i - x_j]`
    #[default]
    ConcatDiff,
    /// `[x_i ; x_j]`
    Concat,
}

impl Combiner {
    pub fn output_dim(self, d: usize) -> usize {
        match self {
            Combiner::ConcatDiff => 3 * d,
            Combiner::Concat => 2 * d,
        }
    }
}

pub fn pair_features(x_i: &[f64], x_j: &[f64], combiner: Combiner) -> Result<Vec<f64>> {
    if x_i.len() != x_j.len() {
        return Err(Error::DimensionMismatch {
            expected: x_i.len(),
            found: x_j.len(),
        });
    }
    let mut out = Vec::with_capacity(combiner.output_dim(x_i.len()));
    out.extend_from_slice(x_i);
    out.extend_from_slice(x_j);
    if combiner == Combiner::ConcatDiff {
        out.extend(x_i.iter().zip(x_j).map(|(a, b)| a - b));
    }
    Ok(out)
}

/// Softmax output for an ordered pair. `s1 + s2 = 1`, both in `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub s1: f64,
    pub s2: f64,
}

impl PairScore {
    /// Smallest probability either component is allowed to take. Keeps both
    /// components strictly inside `(0, 1)` when the logits saturate.
    const FLOOR: f64 = 1e-300;

    pub fn from_logits(logits: &[f64]) -> Self {
        let p = softmax(logits);
        // Saturated logits make one side round to exactly 1.0; keep the pair
        // strictly inside (0, 1) by deriving the large side from the small one.
        if p[0] <= p[1] {
            let s1 = p[0].max(Self::FLOOR);
            PairScore { s1, s2: 1.0 - s1 }.clamped()
        } else {
            let s2 = p[1].max(Self::FLOOR);
            PairScore { s1: 1.0 - s2, s2 }.clamped()
        }
    }

    fn clamped(self) -> Self {
        let hi = 1.0 - f64::EPSILON / 2.0;
        PairScore {
            s1: self.s1.min(hi),
            s2: self.s2.min(hi),
        }
    }
}

/// Cross-entropy between a one-hot pair label and a pair score.
pub fn pairwise_logistic_loss(score: PairScore, label: [f64; 2]) -> f64 {
    -(label[0] * score.s1.ln()) - label[1] * score.s2.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NprmModel {
    pub params: MlpParams,
    pub combiner: Combiner,
}

impl NprmModel {
    pub fn init(doc_dim: usize, cfg: &TrainConfig) -> Self {
        let mut rng = rng_for(cfg.seed, "nprm/init");
        NprmModel {
            params: MlpParams::init(cfg.combiner.output_dim(doc_dim), cfg.hidden, 2, &mut rng),
            combiner: cfg.combiner,
        }
    }

    pub fn doc_dim(&self) -> usize {
        match self.combiner {
            Combiner::ConcatDiff => self.params.input_dim / 3,
            Combiner::Concat => self.params.input_dim / 2,
        }
    }

    pub fn forward(&self, x_i: &[f64], x_j: &[f64]) -> Result<PairScore> {
        let feats = pair_features(x_i, x_j, self.combiner)?;
        let act = self.params.forward(&feats)?;
        Ok(PairScore::from_logits(&act.output))
    }
}

/// Mean pairwise logistic loss over `batch` plus `l2 * ||params||^2`, and
/// its exact gradient.
pub fn nprm_loss_and_gradient(
    model: &NprmModel,
    batch: &[&PairExample],
    corpus: &Corpus,
    l2: f64,
) -> Result<(f64, MlpParams)> {
    let mut grad = model.params.same_shape();
    let loss = accumulate(&model.params, model.combiner, batch, corpus, Some(&mut grad))?;
    Ok(add_l2(&model.params, loss, grad, l2))
}

pub fn nprm_gradient(model: &NprmModel, batch: &[&PairExample], corpus: &Corpus, l2: f64) -> Result<MlpParams> {
    if batch.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    nprm_loss_and_gradient(model, batch, corpus, l2).map(|(_, g)| g)
}

pub fn nprm_loss(model: &NprmModel, batch: &[&PairExample], corpus: &Corpus, l2: f64) -> Result<f64> {
    let loss = accumulate(&model.params, model.combiner, batch, corpus, None)?;
    Ok(loss + l2 * model.params.squared_norm())
}

fn accumulate(
    params: &MlpParams,
    combiner: Combiner,
    batch: &[&PairExample],
    corpus: &Corpus,
    mut grad: Option<&mut MlpParams>,
) -> Result<f64> {
    let n = batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        let feats = pair_features(corpus.vector(&ex.left)?, corpus.vector(&ex.right)?, combiner)?;
        let act = params.forward(&feats)?;
        let score = PairScore::from_logits(&act.output);
        let y = ex.label.one_hot();
        total += pairwise_logistic_loss(score, y);
        if let Some(g) = grad.as_deref_mut() {
            let d_logits = [(score.s1 - y[0]) / n, (score.s2 - y[1]) / n];
            params.backward(&feats, &act, &d_logits, g);
        }
    }
    Ok(total / n)
}

pub(crate) fn add_l2(params: &MlpParams, loss: f64, mut grad: MlpParams, l2: f64) -> (f64, MlpParams) {
    if l2 > 0.0 {
        grad.axpy(2.0 * l2, params);
        (loss + l2 * params.squared_norm(), grad)
    } else {
        (loss, grad)
    }
}

struct PairObjective<'a> {
    corpus: &'a Corpus,
    combiner: Combiner,
    l2: f64,
}

impl Objective<PairExample> for PairObjective<'_> {
    fn loss(&self, params: &MlpParams, batch: &[&PairExample]) -> Result<f64> {
        let loss = accumulate(params, self.combiner, batch, self.corpus, None)?;
        Ok(loss + self.l2 * params.squared_norm())
    }

    fn loss_and_grad(&self, params: &MlpParams, batch: &[&PairExample]) -> Result<(f64, MlpParams)> {
        let mut grad = params.same_shape();
        let loss = accumulate(params, self.combiner, batch, self.corpus, Some(&mut grad))?;
        Ok(add_l2(params, loss, grad, self.l2))
    }
}

/// Minibatch SGD on the pairwise logistic loss.
pub fn train_nprm(pairset: &PairSet, corpus: &Corpus, cfg: &TrainConfig) -> Result<(NprmModel, TrainLog)> {
    cfg.validate()?;
    if pairset.is_empty() {
        return Err(Error::Config("empty pair set".into()));
    }
    if !corpus.is_featurized() {
        return Err(Error::Config("corpus is not featurized".into()));
    }
    let init = NprmModel::init(corpus.dim(), cfg);
    let objective = PairObjective {
        corpus,
        combiner: cfg.combiner,
        l2: cfg.l2,
    };
    let (params, log) = sgd(init.params, &pairset.pairs, cfg, "nprm", &objective)?;
    Ok((
        NprmModel {
            params,
            combiner: cfg.combiner,
        },
        log,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pairs::PairLabel;

    #[test]
    fn combiners() {
        assert_eq!(
            pair_features(&[1.0, 0.0], &[0.0, 1.0], Combiner::ConcatDiff).unwrap(),
            vec![1.0, 0.0, 0.0, 1.0, 1.0, -1.0]
        );
        let same = pair_features(&[0.3, 0.7], &[0.3, 0.7], Combiner::ConcatDiff).unwrap();
        assert_eq!(&same[4..], &[0.0, 0.0]);
        assert_eq!(pair_features(&[1.0, 2.0], &[3.0, 4.0], Combiner::Concat).unwrap().len(), 4);
        assert!(pair_features(&[1.0], &[1.0, 2.0], Combiner::Concat).is_err());
    }

    #[test]
    fn zero_params_give_uniform_score() {
        let model = NprmModel {
            params: MlpParams::zeros(6, 4, 2),
            combiner: Combiner::ConcatDiff,
        };
        let s = model.forward(&[1.0, 2.0], &[-3.0, 0.5]).unwrap();
        assert_eq!(s, PairScore { s1: 0.5, s2: 0.5 });
    }

    #[test]
    fn crafted_logits_ln3() {
        // Output bias alone sets the logits to [ln 3, 0].
        let mut params = MlpParams::zeros(6, 1, 2);
        params.b2 = vec![3f64.ln(), 0.0];
        let model = NprmModel {
            params,
            combiner: Combiner::ConcatDiff,
        };
        let s = model.forward(&[0.2, 0.1], &[0.4, 0.9]).unwrap();
        assert!((s.s1 - 0.75).abs() < 1e-12);
        assert!((s.s2 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn saturated_logits_stay_open_interval() {
        for logits in [[800.0, -800.0], [-800.0, 800.0], [40.0, 0.0], [0.0, 40.0]] {
            let s = PairScore::from_logits(&logits);
            assert!(s.s1 > 0.0 && s.s1 < 1.0, "{s:?}");
            assert!(s.s2 > 0.0 && s.s2 < 1.0, "{s:?}");
            assert!((s.s1 + s.s2 - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn loss_values() {
        let half = PairScore { s1: 0.5, s2: 0.5 };
        assert!((pairwise_logistic_loss(half, [1.0, 0.0]) - 2f64.ln()).abs() < 1e-15);
        let eps = 1e-9;
        let confident = PairScore { s1: 1.0 - eps, s2: eps };
        assert!((pairwise_logistic_loss(confident, [1.0, 0.0]) - eps).abs() < 1e-15);
        let wrong = PairScore { s1: 0.25, s2: 0.75 };
        assert!((pairwise_logistic_loss(wrong, [1.0, 0.0]) - 4f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn zero_weight_output_gradient_is_score_minus_label() {
        use crate::corpus::Document;
        let corpus = Corpus::from_documents(vec![
            Document {
                doc_id: "a".into(),
                slug_id: "s".into(),
                level: 2.0,
                lang: "en".into(),
                text: None,
                vector: Some(vec![1.0, -1.0]),
            },
            Document {
                doc_id: "b".into(),
                slug_id: "s".into(),
                level: 1.0,
                lang: "en".into(),
                text: None,
                vector: Some(vec![0.5, 2.0]),
            },
        ])
        .unwrap();
        let model = NprmModel {
            params: MlpParams::zeros(6, 3, 2),
            combiner: Combiner::ConcatDiff,
        };
        let ex = PairExample {
            slug: "s".into(),
            left: "a".into(),
            right: "b".into(),
            label: PairLabel::LeftHarder,
        };
        let g = nprm_gradient(&model, &[&ex], &corpus, 0.0).unwrap();
        // s = (0.5, 0.5), y = (1, 0); hidden activations are all zero.
        assert_eq!(g.b2, vec![-0.5, 0.5]);
        assert!(g.w2.iter().chain(&g.w1).chain(&g.b1).all(|&v| v == 0.0));

        let g2 = nprm_gradient(&model, &[&ex, &ex], &corpus, 0.0).unwrap();
        assert_eq!(g, g2);
        assert!(nprm_gradient(&model, &[], &corpus, 0.0).is_err());
    }
}
