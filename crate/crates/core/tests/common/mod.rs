//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use readrank::models::MlpParams;
use readrank::{Corpus, Document};

/// Every permutation of `0..n`.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Every vector of length `n` over `values`.
pub fn all_vectors(n: usize, values: &[f64]) -> Vec<Vec<f64>> {
    let mut out = vec![vec![]];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|v| {
                values.iter().map(move |&x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

fn dcg(order: &[usize], gains: &[f64]) -> f64 {
    order
        .iter()
        .enumerate()
        .map(|(i, &d)| gains[d] / ((i + 2) as f64).log2())
        .sum()
}

/// NDCG with linear gain: the mean DCG over every ordering consistent with
/// the predicted scores (ties in any order), divided by the best DCG over all
/// orderings. `None` when the best DCG is zero.
pub fn ndcg_oracle(truth: &[f64], pred: &[f64]) -> Option<f64> {
    let perms = permutations(truth.len());
    let ideal = perms.iter().map(|p| dcg(p, truth)).fold(0.0, f64::max);
    if ideal <= 0.0 {
        return None;
    }
    let consistent: Vec<&Vec<usize>> = perms
        .iter()
        .filter(|p| p.windows(2).all(|w| pred[w[0]] >= pred[w[1]]))
        .collect();
    let mean = consistent.iter().map(|p| dcg(p, truth)).sum::<f64>() / consistent.len() as f64;
    Some(mean / ideal)
}

/// Rank of each value: number of smaller values plus the mean position
/// within its tie group.
fn rank_by_counting(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&x| {
            let less = v.iter().filter(|&&y| y < x).count() as f64;
            let equal = v.iter().filter(|&&y| y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn spearman_oracle(truth: &[f64], pred: &[f64]) -> Option<f64> {
    let (a, b) = (rank_by_counting(truth), rank_by_counting(pred));
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(&b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// Tau-b from explicit pair counts.
pub fn tau_b_oracle(truth: &[f64], pred: &[f64]) -> Option<f64> {
    let n = truth.len();
    let (mut conc, mut disc, mut tx, mut ty) = (0.0f64, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            let dx = truth[i] - truth[j];
            let dy = pred[i] - pred[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tx += 1.0;
            } else if dy == 0.0 {
                ty += 1.0;
            } else if dx * dy > 0.0 {
                conc += 1.0;
            } else {
                disc += 1.0;
            }
        }
    }
    let denom = ((conc + disc + tx) * (conc + disc + ty)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((conc - disc) / denom)
}

/// Two-sided signed-rank p-value by enumerating all `2^n` sign patterns.
/// Returns `(W, p)`.
pub fn wilcoxon_enumeration(diffs: &[f64]) -> (f64, f64) {
    let d: Vec<f64> = diffs.iter().copied().filter(|&x| x != 0.0).collect();
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    let ranks = rank_by_counting(&abs);
    let w_plus: f64 = ranks.iter().zip(&d).filter(|(_, &x)| x > 0.0).map(|(r, _)| r).sum();
    let total: f64 = ranks.iter().sum();
    let w = w_plus.min(total - w_plus);
    let n = d.len();
    let mut at_most = 0u64;
    for mask in 0u64..(1 << n) {
        let t: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if t <= w + 1e-9 {
            at_most += 1;
        }
    }
    (w, (2.0 * at_most as f64 / (1u64 << n) as f64).min(1.0))
}

/// Least squares with intercept as an orthogonal projection: the residual is
/// the part of `ys` outside the column space of `[X 1]`, found from the
/// eigenvectors of `A A^T` with non-negligible eigenvalues.
pub fn pinv_residual_norm(xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let (n, d) = (xs.len(), xs[0].len());
    let a = DMatrix::from_fn(n, d + 1, |i, j| if j < d { xs[i][j] } else { 1.0 });
    let y = DVector::from_column_slice(ys);
    let eig = (&a * a.transpose()).symmetric_eigen();
    let tol = 1e-10 * eig.eigenvalues.amax();
    let mut proj = DVector::zeros(n);
    for (k, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda > tol {
            let u = eig.eigenvectors.column(k);
            proj += u * u.dot(&y);
        }
    }
    (y - proj).norm()
}

/// Central finite-difference gradient of `f` at `params`.
pub fn numeric_gradient(params: &MlpParams, step: f64, mut f: impl FnMut(&MlpParams) -> f64) -> Vec<f64> {
    let n = params.num_params();
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let mut plus = params.clone();
        *plus.iter_mut().nth(k).unwrap() += step;
        let mut minus = params.clone();
        *minus.iter_mut().nth(k).unwrap() -= step;
        out.push((f(&plus) - f(&minus)) / (2.0 * step));
    }
    out
}

/// Largest elementwise `|a - b| / max(|a|, |b|, floor)`.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Whether every hidden pre-activation of `params` on `inputs` is at least
/// `margin` away from the ReLU kink.
pub fn away_from_kink(params: &MlpParams, inputs: &[Vec<f64>], margin: f64) -> bool {
    inputs
        .iter()
        .all(|x| params.forward(x).unwrap().pre.iter().all(|z| z.abs() >= margin))
}

pub fn random_vector(rng: &mut impl rand::Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn doc(id: &str, slug: &str, level: f64, vector: Vec<f64>) -> Document {
    Document {
        doc_id: id.into(),
        slug_id: slug.into(),
        level,
        lang: "en".into(),
        text: None,
        vector: Some(vector),
    }
}

/// A single-slug corpus of random vectors with the given levels.
pub fn random_corpus(rng: &mut impl rand::Rng, levels: &[f64], dim: usize) -> Corpus {
    let docs = levels
        .iter()
        .enumerate()
        .map(|(i, &l)| doc(&format!("d{i}"), "s", l, random_vector(rng, dim, 1.0)))
        .collect();
    Corpus::from_documents(docs).unwrap()
}
