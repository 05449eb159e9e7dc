//! Wilcoxon signed-rank test over paired per-slug metric values.
//!
//! Zero differences are dropped before ranking. Tied absolute differences
//! share their average rank. Up to [`EXACT_MAX_N`] non-zero differences the
//! two-sided p-value comes from the exact null distribution of the signed
//! rank sum; above that, from a normal approximation with tie-corrected
//! variance and a 0.5 continuity correction.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::metrics::{average_ranks, MetricId, MetricReport};

pub const EXACT_MAX_N: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct PairedSample {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl PairedSample {
    pub fn new(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::TestUndefined(format!("sample lengths differ ({} vs {})", a.len(), b.len())));
        }
        if a.is_empty() {
            return Err(Error::TestUndefined("empty sample".into()));
        }
        if a.iter().chain(&b).any(|v| !v.is_finite()) {
            return Err(Error::TestUndefined("non-finite value in sample".into()));
        }
        Ok(PairedSample { a, b })
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestMethod {
    Exact,
    NormalApproximation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    /// `min(W+, W-)`.
    pub statistic: f64,
    pub w_plus: f64,
    pub w_minus: f64,
    pub n_effective: usize,
    pub n_zero_dropped: usize,
    pub p_two_sided: f64,
    pub method: TestMethod,
}

pub fn wilcoxon_signed_rank(sample: &PairedSample) -> Result<TestResult> {
    let diffs: Vec<f64> = sample.a.iter().zip(&sample.b).map(|(a, b)| a - b).filter(|&d| d != 0.0).collect();
    let n = diffs.len();
    let n_zero_dropped = sample.len() - n;
    if n == 0 {
        return Err(Error::TestUndefined("all differences are zero".into()));
    }
    let abs: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&abs);
    let w_plus: f64 = ranks.iter().zip(&diffs).filter(|(_, &d)| d > 0.0).map(|(r, _)| r).sum();
    let w_minus: f64 = ranks.iter().zip(&diffs).filter(|(_, &d)| d < 0.0).map(|(r, _)| r).sum();
    let statistic = w_plus.min(w_minus);

    let (p, method) = if n <= EXACT_MAX_N {
        (exact_p(&ranks, statistic), TestMethod::Exact)
    } else {
        (normal_p(&abs, n, statistic), TestMethod::NormalApproximation)
    };
    Ok(TestResult {
        statistic,
        w_plus,
        w_minus,
        n_effective: n,
        n_zero_dropped,
        p_two_sided: p.clamp(0.0, 1.0),
        method,
    })
}

/// `2 * P(T <= w)` where `T` is the sum of ranks receiving a positive sign
/// under independent fair signs. Ranks are multiples of 1/2, so the
/// distribution is built over doubled ranks.
fn exact_p(ranks: &[f64], w: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let max: usize = doubled.iter().sum();
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let limit = (2.0 * w).round() as usize;
    let at_most: u64 = counts[..=limit.min(max)].iter().sum();
    let total = 2f64.powi(ranks.len() as i32);
    (2.0 * at_most as f64 / total).min(1.0)
}

fn normal_p(abs: &[f64], n: usize, w: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let mut sorted = abs.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut tie_term = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        i = j;
    }
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w - mean + 0.5) / var.sqrt()).min(0.0);
    let normal = Normal::standard();
    (2.0 * normal.cdf(z)).min(1.0)
}

/// Result of a paired comparison of two reports on one metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub metric: MetricId,
    #[serde(rename = "W")]
    pub w: f64,
    pub n: usize,
    pub p: f64,
    pub method: TestMethod,
    pub n_shared_slugs: usize,
    pub n_undefined_dropped: usize,
    pub n_zero_dropped: usize,
    pub n_unshared_slugs: usize,
}

/// Aligns two reports by slug and runs the signed-rank test on `metric`.
/// Slugs where either side is undefined are dropped and counted.
pub fn compare_models(a: &MetricReport, b: &MetricReport, metric: MetricId) -> Result<ComparisonReport> {
    let shared: Vec<&String> = a.per_slug.keys().filter(|k| b.per_slug.contains_key(*k)).collect();
    if shared.is_empty() {
        return Err(Error::TestUndefined("reports share no slugs".into()));
    }
    let n_unshared = a.per_slug.len() + b.per_slug.len() - 2 * shared.len();
    if n_unshared > 0 {
        log::warn!("{n_unshared} slugs appear in only one report and are ignored");
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut undefined = 0;
    for slug in &shared {
        match (a.metric(slug, metric), b.metric(slug, metric)) {
            (Some(x), Some(y)) => {
                xs.push(x);
                ys.push(y);
            }
            _ => undefined += 1,
        }
    }
    if xs.is_empty() {
        return Err(Error::TestUndefined(format!("{metric} is undefined on every shared slug")));
    }
    let result = wilcoxon_signed_rank(&PairedSample::new(xs, ys)?)?;
    Ok(ComparisonReport {
        metric,
        w: result.statistic,
        n: result.n_effective,
        p: result.p_two_sided,
        method: result.method,
        n_shared_slugs: shared.len(),
        n_undefined_dropped: undefined,
        n_zero_dropped: result.n_zero_dropped,
        n_unshared_slugs: n_unshared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test(a: &[f64], b: &[f64]) -> Result<TestResult> {
        wilcoxon_signed_rank(&PairedSample::new(a.to_vec(), b.to_vec())?)
    }

    #[test]
    fn six_positive_differences() {
        let r = test(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[0.0; 6]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_two_sided, 0.03125);
        assert_eq!(r.method, TestMethod::Exact);
    }

    #[test]
    fn single_nonzero_difference() {
        let r = test(&[0.5, 0.7, 0.9], &[0.5, 0.7, 0.8]).unwrap();
        assert_eq!(r.n_effective, 1);
        assert_eq!(r.n_zero_dropped, 2);
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn all_zero_is_undefined() {
        assert!(matches!(test(&[1.0, 2.0], &[1.0, 2.0]), Err(Error::TestUndefined(_))));
        assert!(PairedSample::new(vec![], vec![]).is_err());
        assert!(PairedSample::new(vec![1.0], vec![]).is_err());
    }

    #[test]
    fn symmetric_differences() {
        let a = [1.0, -1.0, 2.0, -2.0, 3.0, -3.0, 4.0, -4.0];
        let r = test(&a, &[0.0; 8]).unwrap();
        assert_eq!(r.statistic, 8.0 * 9.0 / 4.0);
        assert_eq!(r.p_two_sided, 1.0);
    }

    #[test]
    fn ten_slugs_better_by_tenth() {
        let a = [0.9; 10];
        let b = [0.8; 10];
        let r = test(&a, &b).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_two_sided - 2.0 / 1024.0).abs() < 1e-15);
    }

    #[test]
    fn large_sample_uses_normal_approximation() {
        let a: Vec<f64> = (1..=40).map(f64::from).collect();
        let r = test(&a, &[0.0; 40]).unwrap();
        assert_eq!(r.method, TestMethod::NormalApproximation);
        assert!(r.p_two_sided < 1e-6);
        // Exact at the boundary.
        let r = test(&a[..25], &[0.0; 25]).unwrap();
        assert_eq!(r.method, TestMethod::Exact);
        assert!((r.p_two_sided - 2.0 / 2f64.powi(25)).abs() < 1e-20);
    }

    #[test]
    fn normal_approximation_is_close_to_exact_at_moderate_n() {
        let d: Vec<f64> = (0..25).map(|i| if i % 3 == 0 { -(i as f64) - 1.0 } else { i as f64 + 1.0 }).collect();
        let exact = test(&d, &[0.0; 25]).unwrap().p_two_sided;
        let ranks: Vec<f64> = average_ranks(&d.iter().map(|x| x.abs()).collect::<Vec<_>>());
        let w_minus: f64 = ranks.iter().zip(&d).filter(|(_, &x)| x < 0.0).map(|(r, _)| r).sum();
        let approx = normal_p(&d.iter().map(|x| x.abs()).collect::<Vec<_>>(), 25, w_minus);
        assert!((exact - approx).abs() < 0.01, "{exact} vs {approx}");
    }
}
