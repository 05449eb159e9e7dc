//! Ranking and prediction metrics.
//!
//! Ranking metrics compare the predicted scores of the documents in one slug
//! against their true levels. Each one treats ties differently:
//!
//! * NDCG gives every position in a block of tied predictions the mean gain
//!   of that block.
//! * Spearman correlates average ranks.
//! * Kendall's tau-b discounts tied pairs on either side.
//! * Ranking accuracy (RA) is 1 only when every strictly ordered truth pair
//!   is strictly ordered the same way by the prediction.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::ranker::ScoredRanking;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Gain {
    /// `gain = rel`
    #[default]
    Linear,
    /// `gain = 2^rel - 1`
    Exponential,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NdcgOptions {
    pub gain: Gain,
    /// Discount at 1-based position `i` is `1 / log_base(i + 1)`.
    pub log_base: f64,
}

impl Default for NdcgOptions {
    fn default() -> Self {
        NdcgOptions {
            gain: Gain::Linear,
            log_base: 2.0,
        }
    }
}

impl NdcgOptions {
    fn gain(&self, rel: f64) -> f64 {
        match self.gain {
            Gain::Linear => rel,
            Gain::Exponential => rel.exp2() - 1.0,
        }
    }

    fn discount(&self, position: usize) -> f64 {
        1.0 / ((position + 1) as f64).log(self.log_base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricOptions {
    pub ndcg: NdcgOptions,
}

/// True levels and predicted scores of one slug, aligned by document.
#[derive(Debug, Clone, PartialEq)]
pub struct SlugEvaluation {
    pub slug_id: String,
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

impl SlugEvaluation {
    pub fn new(slug_id: impl Into<String>, truth: Vec<f64>, pred: Vec<f64>) -> Result<Self> {
        let slug_id = slug_id.into();
        if truth.len() != pred.len() {
            return Err(Error::Metric(format!(
                "slug {slug_id}: {} levels but {} scores",
                truth.len(),
                pred.len()
            )));
        }
        if truth.len() < 2 {
            return Err(Error::Metric(format!("slug {slug_id}: needs at least two documents")));
        }
        if truth.iter().chain(&pred).any(|v| !v.is_finite()) {
            return Err(Error::Metric(format!("slug {slug_id}: non-finite value")));
        }
        Ok(SlugEvaluation { slug_id, truth, pred })
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

/// NDCG with true levels as relevance. Levels must be non-negative; an
/// all-zero slug has no ideal gain and is an error.
pub fn ndcg(eval: &SlugEvaluation, opts: &NdcgOptions) -> Result<f64> {
    if eval.truth.iter().any(|&t| t < 0.0) {
        return Err(Error::Metric(format!("slug {}: negative relevance", eval.slug_id)));
    }
    let n = eval.len();
    let mut ideal: Vec<f64> = eval.truth.iter().map(|&t| opts.gain(t)).collect();
    ideal.sort_by(|a, b| b.total_cmp(a));
    let idcg: f64 = ideal.iter().enumerate().map(|(i, g)| g * opts.discount(i + 1)).sum();
    if idcg <= 0.0 {
        return Err(Error::Metric(format!("slug {}: ideal DCG is zero", eval.slug_id)));
    }

    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eval.pred[b].total_cmp(&eval.pred[a]));
    let mut dcg = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && eval.pred[idx[end]] == eval.pred[idx[start]] {
            end += 1;
        }
        let mean_gain = idx[start..end].iter().map(|&i| opts.gain(eval.truth[i])).sum::<f64>() / (end - start) as f64;
        dcg += (start..end).map(|p| mean_gain * opts.discount(p + 1)).sum::<f64>();
        start = end;
    }
    Ok(dcg / idcg)
}

/// 1-based ranks in ascending value order, tied values sharing their mean rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[idx[end]] == values[idx[start]] {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        idx[start..end].iter().for_each(|&i| ranks[i] = rank);
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rho on average ranks; `None` when either side is constant.
pub fn spearman(eval: &SlugEvaluation) -> Option<f64> {
    pearson(&average_ranks(&eval.truth), &average_ranks(&eval.pred))
}

/// Kendall's tau-b in `O(n log n)`; `None` when either side is constant.
pub fn kendall(eval: &SlugEvaluation) -> Option<f64> {
    let n = eval.len();
    let (x, y) = (&eval.truth, &eval.pred);
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));

    let pairs = |t: u64| t * t.saturating_sub(1) / 2;
    let tie_pairs = |idx: &[usize], same: &dyn Fn(usize, usize) -> bool| -> u64 {
        let mut total = 0;
        let mut run = 1u64;
        for w in idx.windows(2) {
            if same(w[0], w[1]) {
                run += 1;
            } else {
                total += pairs(run);
                run = 1;
            }
        }
        total + pairs(run)
    };
    let n0 = pairs(n as u64);
    let x_ties = tie_pairs(&idx, &|a, b| x[a] == x[b]);
    let joint_ties = tie_pairs(&idx, &|a, b| x[a] == x[b] && y[a] == y[b]);

    let swaps = merge_sort_count(&mut idx, y);
    let y_ties = tie_pairs(&idx, &|a, b| y[a] == y[b]);

    let denom = ((n0 - x_ties) as f64) * ((n0 - y_ties) as f64);
    if denom <= 0.0 {
        return None;
    }
    let numer = n0 as f64 - x_ties as f64 - y_ties as f64 + joint_ties as f64 - 2.0 * swaps as f64;
    Some((numer / denom.sqrt()).clamp(-1.0, 1.0))
}

/// Stable merge sort of `idx` by `key`, returning the number of inversions.
fn merge_sort_count(idx: &mut [usize], key: &[f64]) -> u64 {
    let n = idx.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = merge_sort_count(&mut idx[..mid], key) + merge_sort_count(&mut idx[mid..], key);
    let mut merged = Vec::with_capacity(n);
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if key[idx[j]] < key[idx[i]] {
            merged.push(idx[j]);
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            merged.push(idx[i]);
            i += 1;
        }
    }
    merged.extend_from_slice(&idx[i..mid]);
    merged.extend_from_slice(&idx[j..n]);
    idx.copy_from_slice(&merged);
    swaps
}

/// True iff every pair with `truth_i > truth_j` has `pred_i > pred_j`.
/// Documents with equal levels may appear in any order among themselves.
pub fn ranking_accuracy(eval: &SlugEvaluation) -> bool {
    let n = eval.len();
    (0..n).all(|i| (0..n).all(|j| eval.truth[i] <= eval.truth[j] || eval.pred[i] > eval.pred[j]))
}

fn has_ties(values: &[f64]) -> bool {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v.windows(2).any(|w| w[0] == w[1])
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub weighted_f1: f64,
}

/// Accuracy and support-weighted F1 over exact label matches.
pub fn classification_metrics(truth: &[f64], pred: &[f64]) -> Result<ClassificationMetrics> {
    if truth.len() != pred.len() {
        return Err(Error::Metric("truth and prediction lengths differ".into()));
    }
    if truth.is_empty() {
        return Err(Error::Metric("no labels".into()));
    }
    let n = truth.len() as f64;
    let correct = truth.iter().zip(pred).filter(|(t, p)| t == p).count() as f64;

    let mut labels: Vec<f64> = truth.to_vec();
    labels.sort_by(f64::total_cmp);
    labels.dedup();
    let mut weighted_f1 = 0.0;
    for &c in &labels {
        let support = truth.iter().filter(|&&t| t == c).count() as f64;
        let predicted = pred.iter().filter(|&&p| p == c).count() as f64;
        let tp = truth.iter().zip(pred).filter(|&(&t, &p)| t == c && p == c).count() as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = tp / support;
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        weighted_f1 += support / n * f1;
    }
    Ok(ClassificationMetrics {
        accuracy: correct / n,
        weighted_f1,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionMetrics {
    pub mae: f64,
    pub mse: f64,
}

pub fn regression_metrics(truth: &[f64], pred: &[f64]) -> Result<RegressionMetrics> {
    if truth.len() != pred.len() {
        return Err(Error::Metric("truth and prediction lengths differ".into()));
    }
    if truth.is_empty() {
        return Err(Error::Metric("no values".into()));
    }
    let n = truth.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (t, p) in truth.iter().zip(pred) {
        let e = p - t;
        abs += e.abs();
        sq += e * e;
    }
    Ok(RegressionMetrics { mae: abs / n, mse: sq / n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlugMetrics {
    pub n_docs: usize,
    pub ndcg: Option<f64>,
    pub src: Option<f64>,
    pub ktcc: Option<f64>,
    pub ra: u8,
    /// The slug has documents sharing a level.
    pub tied_truth: bool,
}

impl SlugMetrics {
    pub fn compute(eval: &SlugEvaluation, opts: &MetricOptions) -> Self {
        SlugMetrics {
            n_docs: eval.len(),
            ndcg: ndcg(eval, &opts.ndcg).ok(),
            src: spearman(eval),
            ktcc: kendall(eval),
            ra: u8::from(ranking_accuracy(eval)),
            tied_truth: has_ties(&eval.truth),
        }
    }
}

/// Means over slugs where each metric is defined; RA is the fraction of
/// slugs ranked completely correctly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregates {
    pub n_slugs: usize,
    pub ndcg: Option<f64>,
    pub src: Option<f64>,
    pub ktcc: Option<f64>,
    pub ra: Option<f64>,
    pub undefined_ndcg: usize,
    pub undefined_src: usize,
    pub undefined_ktcc: usize,
    pub tied_truth_slugs: usize,
}

impl Aggregates {
    pub fn from_slugs<'a>(slugs: impl IntoIterator<Item = &'a SlugMetrics>) -> Self {
        let mut n = 0;
        let (mut ndcg, mut src, mut ktcc) = (Mean::default(), Mean::default(), Mean::default());
        let mut ra = Mean::default();
        let mut tied = 0;
        for s in slugs {
            n += 1;
            ndcg.push(s.ndcg);
            src.push(s.src);
            ktcc.push(s.ktcc);
            ra.push(Some(f64::from(s.ra)));
            tied += usize::from(s.tied_truth);
        }
        Aggregates {
            n_slugs: n,
            ndcg: ndcg.value(),
            src: src.value(),
            ktcc: ktcc.value(),
            ra: ra.value(),
            undefined_ndcg: ndcg.missing,
            undefined_src: src.missing,
            undefined_ktcc: ktcc.missing,
            tied_truth_slugs: tied,
        }
    }
}

#[derive(Default)]
struct Mean {
    sum: f64,
    count: usize,
    missing: usize,
}

impl Mean {
    fn push(&mut self, v: Option<f64>) {
        match v {
            Some(v) => {
                self.sum += v;
                self.count += 1;
            }
            None => self.missing += 1,
        }
    }

    fn value(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum / self.count as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub per_slug: BTreeMap<String, SlugMetrics>,
    pub aggregates: Aggregates,
    /// Added to every level before NDCG so relevances are non-negative.
    pub level_shift: f64,
    pub options: MetricOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification: Option<ClassificationMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<RegressionMetrics>,
}

impl MetricReport {
    pub fn from_per_slug(per_slug: BTreeMap<String, SlugMetrics>, level_shift: f64, options: MetricOptions) -> Self {
        let aggregates = Aggregates::from_slugs(per_slug.values());
        MetricReport {
            per_slug,
            aggregates,
            level_shift,
            options,
            classification: None,
            regression: None,
        }
    }

    /// Union of the per-slug entries of several reports, with aggregates
    /// recomputed. Slug ids must not repeat.
    pub fn pool<'a>(reports: impl IntoIterator<Item = &'a MetricReport>) -> Result<MetricReport> {
        let mut per_slug = BTreeMap::new();
        let mut shift = None;
        let mut options = None;
        for r in reports {
            for (id, m) in &r.per_slug {
                if per_slug.insert(id.clone(), m.clone()).is_some() {
                    return Err(Error::Metric(format!("slug {id} appears in more than one report")));
                }
            }
            shift.get_or_insert(r.level_shift);
            options.get_or_insert(r.options);
        }
        Ok(MetricReport::from_per_slug(
            per_slug,
            shift.unwrap_or(0.0),
            options.unwrap_or_default(),
        ))
    }

    pub fn metric(&self, slug_id: &str, metric: MetricId) -> Option<f64> {
        let m = self.per_slug.get(slug_id)?;
        match metric {
            MetricId::Ndcg => m.ndcg,
            MetricId::Src => m.src,
            MetricId::Ktcc => m.ktcc,
            MetricId::Ra => Some(f64::from(m.ra)),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricId {
    Ndcg,
    Src,
    Ktcc,
    Ra,
}

impl std::str::FromStr for MetricId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ndcg" => Ok(MetricId::Ndcg),
            "src" | "spearman" => Ok(MetricId::Src),
            "ktcc" | "kendall" => Ok(MetricId::Ktcc),
            "ra" => Ok(MetricId::Ra),
            _ => Err(Error::Config(format!("unknown metric {s:?}"))),
        }
    }
}

impl std::fmt::Display for MetricId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MetricId::Ndcg => "ndcg",
            MetricId::Src => "src",
            MetricId::Ktcc => "ktcc",
            MetricId::Ra => "ra",
        })
    }
}

/// Shift that makes every level of `corpus` non-negative.
pub fn level_shift(corpus: &Corpus) -> f64 {
    match corpus.min_level() {
        Some(min) if min < 0.0 => -min,
        _ => 0.0,
    }
}

/// Scores every rankable slug of `corpus` against its ranking.
pub fn evaluate_corpus(
    rankings: &BTreeMap<String, ScoredRanking>,
    corpus: &Corpus,
    options: &MetricOptions,
) -> Result<MetricReport> {
    evaluate_corpus_with_shift(rankings, corpus, options, level_shift(corpus))
}

/// Like [`evaluate_corpus`] with an explicit level shift, so several
/// evaluations over parts of one corpus share the same relevance scale.
pub fn evaluate_corpus_with_shift(
    rankings: &BTreeMap<String, ScoredRanking>,
    corpus: &Corpus,
    options: &MetricOptions,
    shift: f64,
) -> Result<MetricReport> {
    let mut per_slug = BTreeMap::new();
    for slug in corpus.rankable_slugs() {
        let ranking = rankings
            .get(&slug.slug_id)
            .ok_or_else(|| Error::Metric(format!("no ranking for slug {}", slug.slug_id)))?;
        let mut truth = Vec::with_capacity(slug.members.len());
        let mut pred = Vec::with_capacity(slug.members.len());
        for id in &slug.members {
            truth.push(corpus.level(id)? + shift);
            pred.push(ranking.score(id).ok_or_else(|| {
                Error::Metric(format!("ranking for slug {} has no score for {id}", slug.slug_id))
            })?);
        }
        let eval = SlugEvaluation::new(&slug.slug_id, truth, pred)?;
        per_slug.insert(slug.slug_id.clone(), SlugMetrics::compute(&eval, options));
    }
    if per_slug.is_empty() {
        return Err(Error::NoRankableSlugs);
    }
    let report = MetricReport::from_per_slug(per_slug, shift, *options);
    if report.aggregates.tied_truth_slugs > 0 {
        log::info!(
            "{} slugs contain tied levels; RA accepts any order within tied levels",
            report.aggregates.tied_truth_slugs
        );
    }
    Ok(report)
}

/// Aligned text table, one row per model.
pub fn render_table(rows: &[(&str, &MetricReport)]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Model".len());
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}", "Model", "NDCG", "SRC", "KTCC", "RA");
    for (name, r) in rows {
        let a = &r.aggregates;
        let _ = writeln!(
            out,
            "{:<width$}  {:>6}  {:>6}  {:>6}  {:>6}",
            name,
            fmt(a.ndcg),
            fmt(a.src),
            fmt(a.ktcc),
            fmt(a.ra)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(truth: &[f64], pred: &[f64]) -> SlugEvaluation {
        SlugEvaluation::new("s", truth.to_vec(), pred.to_vec()).unwrap()
    }

    const OPTS: NdcgOptions = NdcgOptions {
        gain: Gain::Linear,
        log_base: 2.0,
    };

    #[test]
    fn ndcg_examples() {
        assert_eq!(ndcg(&ev(&[3.0, 2.0, 1.0], &[9.0, 5.0, 1.0]), &OPTS).unwrap(), 1.0);
        let l3 = 3f64.log2();
        let reversed = ndcg(&ev(&[3.0, 1.0], &[0.0, 1.0]), &OPTS).unwrap();
        assert!((reversed - (1.0 + 3.0 / l3) / (3.0 + 1.0 / l3)).abs() < 1e-12);
        assert!((reversed - 0.7967).abs() < 1e-4);
        let tied = ndcg(&ev(&[3.0, 1.0], &[0.5, 0.5]), &OPTS).unwrap();
        assert!((tied - 0.8984).abs() < 1e-4, "{tied}");
        assert!(ndcg(&ev(&[0.0, 0.0], &[1.0, 2.0]), &OPTS).is_err());
        assert!(ndcg(&ev(&[-1.0, 0.0], &[1.0, 2.0]), &OPTS).is_err());
    }

    #[test]
    fn ndcg_exponential_gain() {
        let opts = NdcgOptions {
            gain: Gain::Exponential,
            log_base: 2.0,
        };
        let v = ndcg(&ev(&[2.0, 1.0], &[0.0, 1.0]), &opts).unwrap();
        let l3 = 3f64.log2();
        assert!((v - (1.0 + 3.0 / l3) / (3.0 + 1.0 / l3)).abs() < 1e-12);
    }

    #[test]
    fn spearman_examples() {
        assert_eq!(spearman(&ev(&[4.0, 3.0, 2.0, 1.0], &[1.0, 2.0, 3.0, 4.0])), Some(-1.0));
        assert_eq!(spearman(&ev(&[4.0, 3.0, 2.0, 1.0], &[8.0, 6.0, 4.0, 2.0])), Some(1.0));
        let v = spearman(&ev(&[3.0, 2.0, 1.0], &[10.0, 1.0, 5.0])).unwrap();
        assert!((v - 0.5).abs() < 1e-12);
        assert_eq!(spearman(&ev(&[3.0, 2.0], &[1.0, 1.0])), None);
    }

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall(&ev(&[4.0, 3.0, 2.0, 1.0], &[1.0, 2.0, 3.0, 4.0])), Some(-1.0));
        let v = kendall(&ev(&[3.0, 2.0, 1.0], &[10.0, 1.0, 5.0])).unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
        // One tied predicted pair, strict truth: C = 2, D = 0.
        let v = kendall(&ev(&[3.0, 2.0, 1.0], &[5.0, 5.0, 1.0])).unwrap();
        assert!((v - 2.0 / 6f64.sqrt()).abs() < 1e-12, "{v}");
        assert_eq!(kendall(&ev(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0])), None);
    }

    #[test]
    fn ranking_accuracy_examples() {
        assert!(ranking_accuracy(&ev(&[3.0, 2.0, 1.0], &[0.9, 0.5, 0.1])));
        assert!(!ranking_accuracy(&ev(&[3.0, 2.0, 1.0], &[0.5, 0.9, 0.1])));
        assert!(!ranking_accuracy(&ev(&[3.0, 2.0, 1.0], &[0.9, 0.9, 0.1])));
        // Tied truth: any internal order, but the block must stay contiguous.
        assert!(ranking_accuracy(&ev(&[3.0, 2.0, 2.0, 1.0], &[9.0, 4.0, 5.0, 1.0])));
        assert!(ranking_accuracy(&ev(&[2.0, 2.0], &[4.0, 4.0])));
        assert!(!ranking_accuracy(&ev(&[3.0, 2.0, 2.0, 1.0], &[9.0, 4.0, 0.5, 1.0])));
    }

    #[test]
    fn classification_examples() {
        let m = classification_metrics(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap();
        assert_eq!((m.accuracy, m.weighted_f1), (1.0, 1.0));
        let m = classification_metrics(&[0.0, 0.0, 1.0, 1.0], &[0.0, 1.0, 1.0, 1.0]).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert!((m.weighted_f1 - (0.5 * 2.0 / 3.0 + 0.5 * 0.8)).abs() < 1e-12);
        let m = classification_metrics(&[2.0, 2.0], &[2.0, 2.0]).unwrap();
        assert_eq!((m.accuracy, m.weighted_f1), (1.0, 1.0));
        assert!(classification_metrics(&[], &[]).is_err());
        assert!(classification_metrics(&[1.0], &[]).is_err());
    }

    #[test]
    fn regression_examples() {
        let m = regression_metrics(&[1.0, 2.0], &[1.0, 2.0]).unwrap();
        assert_eq!((m.mae, m.mse), (0.0, 0.0));
        let m = regression_metrics(&[1.0, 2.0], &[2.0, 1.0]).unwrap();
        assert_eq!((m.mae, m.mse), (1.0, 1.0));
        let m = regression_metrics(&[0.0, 0.0, 0.0], &[3.0, 0.0, 0.0]).unwrap();
        assert_eq!((m.mae, m.mse), (1.0, 3.0));
        assert!(regression_metrics(&[], &[]).is_err());
    }

    #[test]
    fn evaluation_input_validation() {
        assert!(SlugEvaluation::new("s", vec![1.0], vec![1.0]).is_err());
        assert!(SlugEvaluation::new("s", vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(SlugEvaluation::new("s", vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn average_ranks_share_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn table_layout() {
        let slug = SlugMetrics::compute(&ev(&[2.0, 1.0], &[1.0, 0.0]), &MetricOptions::default());
        let r = MetricReport::from_per_slug(BTreeMap::from([("s".into(), slug)]), 0.0, MetricOptions::default());
        let t = render_table(&[("nprm", &r), ("ols", &r)]);
        let lines: Vec<&str> = t.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[0].starts_with("Model"));
        assert!(lines[1].contains("1.000"));
        assert_eq!(lines[1].len(), lines[0].len());
    }
}
