//! Linear baselines: a rank-SVM over difference features and ordinary least
//! squares on document vectors.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::mlp::dot;
use super::{TrainConfig, TrainLog};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::pairs::{PairExample, PairSet};
use crate::rng::rng_for;

/// Ridge added to the centered Gram matrix when it is not positive definite,
/// scaled by its mean diagonal (floored at 1).
pub const OLS_RIDGE_FALLBACK: f64 = 1e-8;

/// Upper bound on refinement passes after a ridge fallback.
const OLS_REFINE_STEPS: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl LinearParams {
    pub fn zeros(dim: usize) -> Self {
        LinearParams {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.weights.len() {
            return Err(Error::DimensionMismatch {
                expected: self.weights.len(),
                found: x.len(),
            });
        }
        Ok(dot(&self.weights, x) + self.bias)
    }

    /// Rank-SVM decision value `w . (x_i - x_j) + b`.
    pub fn decision(&self, x_i: &[f64], x_j: &[f64]) -> Result<f64> {
        if x_i.len() != x_j.len() {
            return Err(Error::DimensionMismatch {
                expected: x_i.len(),
                found: x_j.len(),
            });
        }
        let diff: Vec<f64> = x_i.iter().zip(x_j).map(|(a, b)| a - b).collect();
        self.predict(&diff)
    }
}

/// `l2 * ||w||^2 + mean(max(0, 1 - y (w . d + b)))` over the batch, with
/// `y = +1` for `[1,0]` labels and `d = x_left - x_right`.
pub fn ranksvm_objective(params: &LinearParams, batch: &[&PairExample], corpus: &Corpus, l2: f64) -> Result<f64> {
    let mut total = 0.0;
    for ex in batch {
        let margin = ex.label.sign() * params.decision(corpus.vector(&ex.left)?, corpus.vector(&ex.right)?)?;
        total += (1.0 - margin).max(0.0);
    }
    Ok(total / batch.len() as f64 + l2 * dot(&params.weights, &params.weights))
}

/// Subgradient of [`ranksvm_objective`]; the hinge contributes nothing at a
/// margin of exactly 1.
pub fn ranksvm_subgradient(
    params: &LinearParams,
    batch: &[&PairExample],
    corpus: &Corpus,
    l2: f64,
) -> Result<LinearParams> {
    let n = batch.len() as f64;
    let mut grad = LinearParams::zeros(params.weights.len());
    for ex in batch {
        let (xi, xj) = (corpus.vector(&ex.left)?, corpus.vector(&ex.right)?);
        let y = ex.label.sign();
        let margin = y * params.decision(xi, xj)?;
        if margin < 1.0 {
            for ((g, a), b) in grad.weights.iter_mut().zip(xi).zip(xj) {
                *g -= y * (a - b) / n;
            }
            grad.bias -= y / n;
        }
    }
    for (g, w) in grad.weights.iter_mut().zip(&params.weights) {
        *g += 2.0 * l2 * w;
    }
    Ok(grad)
}

/// Subgradient descent on the hinge objective, step size
/// `learning_rate / sqrt(1 + epoch)`.
pub fn train_ranksvm(pairset: &PairSet, corpus: &Corpus, cfg: &TrainConfig) -> Result<(LinearParams, TrainLog)> {
    cfg.validate()?;
    if pairset.is_empty() {
        return Err(Error::Config("empty pair set".into()));
    }
    if !corpus.is_featurized() {
        return Err(Error::Config("corpus is not featurized".into()));
    }
    let mut params = LinearParams::zeros(corpus.dim());
    let mut rng = rng_for(cfg.seed, "ranksvm/shuffle");
    let mut order: Vec<usize> = (0..pairset.len()).collect();
    let all: Vec<&PairExample> = pairset.pairs.iter().collect();
    let mut log = TrainLog::default();
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate / ((1 + epoch) as f64).sqrt();
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&PairExample> = chunk.iter().map(|&i| &pairset.pairs[i]).collect();
            let g = ranksvm_subgradient(&params, &batch, corpus, cfg.l2)?;
            for (w, gw) in params.weights.iter_mut().zip(&g.weights) {
                *w -= lr * gw;
            }
            params.bias -= lr * g.bias;
        }
        let loss = ranksvm_objective(&params, &all, corpus, cfg.l2)?;
        if !loss.is_finite() || params.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::Diverged { epoch, loss });
        }
        log.epoch_losses.push(loss);
    }
    Ok((params, log))
}

/// Least-squares fit of `level ~ w . x + b` over `docs`, solved through the
/// normal equations on centered data. Falls back to a tiny ridge when the
/// Gram matrix is singular.
pub fn train_ols(corpus: &Corpus, docs: &[String]) -> Result<LinearParams> {
    if docs.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let rows = docs
        .iter()
        .map(|id| Ok((corpus.vector(id)?, corpus.level(id)?)))
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<&[f64]> = rows.iter().map(|r| r.0).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1).collect();
    fit_ols(&xs, &ys)
}

pub fn fit_ols(xs: &[&[f64]], ys: &[f64]) -> Result<LinearParams> {
    let n = xs.len();
    if n == 0 || n != ys.len() {
        return Err(Error::Config("OLS needs equal, non-zero numbers of rows and targets".into()));
    }
    let d = xs[0].len();
    if let Some(bad) = xs.iter().find(|x| x.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.len(),
        });
    }
    let nf = n as f64;
    let mut x_mean = vec![0.0; d];
    for x in xs {
        x_mean.iter_mut().zip(*x).for_each(|(m, v)| *m += v / nf);
    }
    let y_mean = ys.iter().sum::<f64>() / nf;

    let mut gram = vec![0.0; d * d];
    let mut rhs = vec![0.0; d];
    let mut centered = vec![0.0; d];
    for (x, y) in xs.iter().zip(ys) {
        centered.iter_mut().zip(*x).zip(&x_mean).for_each(|((c, v), m)| *c = v - m);
        let yc = y - y_mean;
        for i in 0..d {
            rhs[i] += centered[i] * yc;
            for j in 0..=i {
                gram[i * d + j] += centered[i] * centered[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..i {
            gram[j * d + i] = gram[i * d + j];
        }
    }

    let weights = match cholesky(&gram, d) {
        Some(l) => solve_factored(&l, &rhs, d),
        None => {
            let mean_diag = (0..d).map(|i| gram[i * d + i]).sum::<f64>() / d as f64;
            let ridge = OLS_RIDGE_FALLBACK * mean_diag.max(1.0);
            log::debug!("singular Gram matrix, ridge fallback {ridge:e}");
            let mut g = gram.clone();
            (0..d).for_each(|i| g[i * d + i] += ridge);
            let l = cholesky(&g, d).ok_or_else(|| Error::NonFinite("OLS ridge solve".into()))?;
            // Iterated ridge: each pass solves for the remaining normal-equation
            // residual, converging to the minimum-norm least-squares solution.
            let mut w = vec![0.0; d];
            for _ in 0..OLS_REFINE_STEPS {
                let resid: Vec<f64> = (0..d).map(|i| rhs[i] - dot(&gram[i * d..(i + 1) * d], &w)).collect();
                let step = solve_factored(&l, &resid, d);
                w.iter_mut().zip(&step).for_each(|(a, b)| *a += b);
                if dot(&step, &step).sqrt() <= 1e-15 * (1.0 + dot(&w, &w).sqrt()) {
                    break;
                }
            }
            w
        }
    };
    let bias = y_mean - dot(&weights, &x_mean);
    if !bias.is_finite() || weights.iter().any(|w| !w.is_finite()) {
        return Err(Error::NonFinite("OLS solution".into()));
    }
    Ok(LinearParams { weights, bias })
}

/// Lower Cholesky factor of symmetric `a` (row-major, `d x d`), or `None`
/// when `a` is not numerically positive definite.
fn cholesky(a: &[f64], d: usize) -> Option<Vec<f64>> {
    let max_diag = (0..d).map(|i| a[i * d + i]).fold(0.0, f64::max);
    let tol = max_diag * 1e-12;
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let s: f64 = (0..j).map(|k| l[i * d + k] * l[j * d + k]).sum();
            if i == j {
                let pivot = a[i * d + i] - s;
                if pivot.is_nan() || pivot <= tol {
                    return None;
                }
                l[i * d + i] = pivot.sqrt();
            } else {
                l[i * d + j] = (a[i * d + j] - s) / l[j * d + j];
            }
        }
    }
    Some(l)
}

fn solve_factored(l: &[f64], b: &[f64], d: usize) -> Vec<f64> {
    let mut z = vec![0.0; d];
    for i in 0..d {
        let s: f64 = (0..i).map(|k| l[i * d + k] * z[k]).sum();
        z[i] = (b[i] - s) / l[i * d + i];
    }
    let mut x = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = (i + 1..d).map(|k| l[k * d + i] * x[k]).sum();
        x[i] = (z[i] - s) / l[i * d + i];
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interpolates_exact_line() {
        let xs: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0], vec![2.0]];
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let p = fit_ols(&refs, &[1.0, 3.0, 5.0]).unwrap();
        assert!((p.weights[0] - 2.0).abs() < 1e-9);
        assert!((p.bias - 1.0).abs() < 1e-9);
    }

    #[test]
    fn constant_target() {
        let xs: Vec<Vec<f64>> = vec![vec![0.3, 1.0], vec![-1.0, 2.0], vec![4.0, 0.5], vec![2.0, 2.0]];
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let p = fit_ols(&refs, &[5.0; 4]).unwrap();
        assert!(p.weights.iter().all(|w| w.abs() < 1e-12));
        assert!((p.bias - 5.0).abs() < 1e-12);
    }

    #[test]
    fn singular_gram_uses_ridge() {
        // Duplicate feature column and a constant column.
        let xs: Vec<Vec<f64>> = vec![vec![1.0, 1.0, 7.0], vec![2.0, 2.0, 7.0], vec![3.0, 3.0, 7.0]];
        let refs: Vec<&[f64]> = xs.iter().map(Vec::as_slice).collect();
        let p = fit_ols(&refs, &[2.0, 4.0, 6.0]).unwrap();
        for (x, y) in xs.iter().zip([2.0, 4.0, 6.0]) {
            assert!((p.predict(x).unwrap() - y).abs() < 1e-6);
        }
        assert!((p.weights[0] - p.weights[1]).abs() < 1e-6);
        assert!(p.weights[2].abs() < 1e-9);
    }

    #[test]
    fn single_row() {
        let p = fit_ols(&[&[1.0, 2.0][..]], &[3.0]).unwrap();
        assert!((p.predict(&[1.0, 2.0]).unwrap() - 3.0).abs() < 1e-12);
        assert!(fit_ols(&[], &[]).is_err());
    }

    #[test]
    fn decision_linearity() {
        let p = LinearParams {
            weights: vec![0.5, -2.0],
            bias: 0.25,
        };
        let a = [1.0, 3.0];
        let b = [-0.5, 0.75];
        assert_eq!(p.decision(&a, &a).unwrap(), 0.25);
        let ab = p.decision(&a, &b).unwrap();
        let ba = p.decision(&b, &a).unwrap();
        assert!((ab + ba - 2.0 * p.bias).abs() < 1e-12);
    }
}
