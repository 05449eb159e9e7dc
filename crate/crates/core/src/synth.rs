//! Synthetic leveled corpora with a known difficulty direction.
//!
//! Each document vector is `topic + jitter + (level + noise * e) * w`, where
//! `w` is a unit "difficulty" direction shared by every corpus generated from
//! the same `space_seed`, topic and jitter are orthogonal to `w`, and `e` is
//! standard normal. The true level is therefore `w . x` plus Gaussian noise
//! of scale `noise`.
//!
//! Distribution shift is produced by rotating every vector, either inside the
//! plane of `w` and a fixed partner direction, or by a uniformly random
//! orthogonal map (an unaligned embedding space).

use rand::seq::index;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, EmbeddingTable};
use crate::error::{Error, Result};
use crate::rng::{rng_for, Rng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub slugs: usize,
    pub levels_per_slug: usize,
    /// Number of distinct levels `0..level_scale` slugs draw from. Defaults
    /// to `levels_per_slug`, in which case every slug has every level.
    pub level_scale: Option<usize>,
    pub dim: usize,
    pub noise: f64,
    /// Per-document spread orthogonal to the difficulty direction.
    pub jitter: f64,
    /// Per-slug spread orthogonal to the difficulty direction.
    pub topic_scale: f64,
    pub seed: u64,
    /// Seed of the latent space (difficulty direction and rotation plane).
    pub space_seed: u64,
    /// Rotation angle in degrees inside the difficulty plane.
    pub rotation_deg: f64,
    /// Apply a random orthogonal map drawn from `seed`.
    pub random_rotation: bool,
    pub lang: String,
    /// Length of a constant language-specific offset orthogonal to `w`.
    pub lang_shift: f64,
    pub id_prefix: String,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            slugs: 200,
            levels_per_slug: 3,
            level_scale: None,
            dim: 16,
            noise: 0.1,
            jitter: 0.5,
            topic_scale: 1.0,
            seed: 0,
            space_seed: 0,
            rotation_deg: 0.0,
            random_rotation: false,
            lang: "en".into(),
            lang_shift: 0.0,
            id_prefix: String::new(),
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<usize> {
        let scale = self.level_scale.unwrap_or(self.levels_per_slug);
        if self.slugs == 0 {
            return Err(Error::Config("slugs must be at least 1".into()));
        }
        if self.levels_per_slug == 0 {
            return Err(Error::Config("levels_per_slug must be at least 1".into()));
        }
        if scale < self.levels_per_slug {
            return Err(Error::Config(format!(
                "level_scale {scale} is smaller than levels_per_slug {}",
                self.levels_per_slug
            )));
        }
        if self.dim < 2 {
            return Err(Error::Config("dim must be at least 2".into()));
        }
        for (name, v) in [
            ("noise", self.noise),
            ("jitter", self.jitter),
            ("topic_scale", self.topic_scale),
            ("lang_shift", self.lang_shift),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be a non-negative number")));
            }
        }
        if !self.rotation_deg.is_finite() {
            return Err(Error::Config("rotation_deg must be finite".into()));
        }
        Ok(scale)
    }
}

/// The latent functional behind a synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    /// `level ~ direction . x` before any rotation.
    pub direction: Vec<f64>,
    /// Second axis of the rotation plane.
    pub partner: Vec<f64>,
    pub noise: f64,
    pub rotation_deg: f64,
    pub random_rotation: bool,
    pub config: SynthConfig,
}

pub fn generate(cfg: &SynthConfig) -> Result<(Corpus, SynthTruth)> {
    let scale = cfg.validate()?;
    let d = cfg.dim;
    let mut space = rng_for(cfg.space_seed, "synth/space");
    let w = unit(gaussian(&mut space, d));
    let v = unit(orthogonalize(gaussian(&mut space, d), &[&w]));

    let mut rng = rng_for(cfg.seed, "synth/docs");
    let offset = if cfg.lang_shift > 0.0 {
        let mut lang_rng = rng_for(cfg.space_seed, &format!("synth/lang/{}", cfg.lang));
        let o = unit(orthogonalize(gaussian(&mut lang_rng, d), &[&w]));
        o.into_iter().map(|x| x * cfg.lang_shift).collect()
    } else {
        vec![0.0; d]
    };
    let rotation = cfg.random_rotation.then(|| random_orthogonal(&mut rng_for(cfg.seed, "synth/rotation"), d));
    let (sin, cos) = cfg.rotation_deg.to_radians().sin_cos();

    let width = cfg.slugs.to_string().len();
    let mut docs = Vec::with_capacity(cfg.slugs * cfg.levels_per_slug);
    for s in 0..cfg.slugs {
        let slug_id = format!("{}s{:0width$}", cfg.id_prefix, s);
        let topic = orthogonalize(scaled(gaussian(&mut rng, d), cfg.topic_scale), &[&w]);
        let mut levels: Vec<usize> = if scale == cfg.levels_per_slug {
            (0..scale).collect()
        } else {
            index::sample(&mut rng, scale, cfg.levels_per_slug).into_vec()
        };
        levels.sort_unstable();
        for level in levels {
            let jitter = orthogonalize(scaled(gaussian(&mut rng, d), cfg.jitter), &[&w]);
            let e: f64 = StandardNormal.sample(&mut rng);
            let along = level as f64 + cfg.noise * e;
            let mut x: Vec<f64> = (0..d).map(|i| topic[i] + jitter[i] + offset[i] + along * w[i]).collect();
            if cfg.rotation_deg != 0.0 {
                x = rotate_in_plane(&x, &w, &v, cos, sin);
            }
            if let Some(q) = &rotation {
                x = matvec(q, &x);
            }
            docs.push(Document {
                doc_id: format!("{slug_id}-l{level}"),
                slug_id: slug_id.clone(),
                level: level as f64,
                lang: cfg.lang.clone(),
                text: None,
                vector: Some(x),
            });
        }
    }
    let mut corpus = Corpus::from_documents(docs)?;
    corpus.set_embedding_id(format!("synth-space-{}", cfg.space_seed));
    let truth = SynthTruth {
        direction: w,
        partner: v,
        noise: cfg.noise,
        rotation_deg: cfg.rotation_deg,
        random_rotation: cfg.random_rotation,
        config: cfg.clone(),
    };
    Ok((corpus, truth))
}

/// Replaces each document's vector by a one-token text whose embedding is
/// that vector, so the corpus can go through the text featurization path.
pub fn as_text_corpus(corpus: &Corpus) -> Result<(Corpus, EmbeddingTable)> {
    let mut entries = Vec::with_capacity(corpus.len());
    let mut docs = Vec::with_capacity(corpus.len());
    for doc in corpus.documents() {
        let token = format!("doc_{}", doc.doc_id).to_lowercase();
        entries.push((token.clone(), corpus.vector(&doc.doc_id)?.to_vec()));
        let mut d = doc.clone();
        d.vector = None;
        d.text = Some(token);
        docs.push(d);
    }
    let table = EmbeddingTable::new(entries, corpus.embedding_id().unwrap_or("synthetic"))?;
    Ok((Corpus::from_documents(docs)?, table))
}

fn gaussian(rng: &mut Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

fn scaled(v: Vec<f64>, s: f64) -> Vec<f64> {
    v.into_iter().map(|x| x * s).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

/// Removes the components along each (unit) basis vector.
fn orthogonalize(mut v: Vec<f64>, basis: &[&[f64]]) -> Vec<f64> {
    for b in basis {
        let p = dot(&v, b);
        v.iter_mut().zip(*b).for_each(|(x, bi)| *x -= p * bi);
    }
    v
}

fn rotate_in_plane(x: &[f64], u: &[f64], v: &[f64], cos: f64, sin: f64) -> Vec<f64> {
    let (a, b) = (dot(x, u), dot(x, v));
    let (a2, b2) = (cos * a - sin * b, sin * a + cos * b);
    x.iter()
        .zip(u)
        .zip(v)
        .map(|((xi, ui), vi)| xi + (a2 - a) * ui + (b2 - b) * vi)
        .collect()
}

/// Gram-Schmidt on a Gaussian matrix; rows form an orthonormal basis.
fn random_orthogonal(rng: &mut Rng, d: usize) -> Vec<Vec<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(d);
    while rows.len() < d {
        let basis: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let v = orthogonalize(gaussian(rng, d), &basis);
        if dot(&v, &v) > 1e-12 {
            rows.push(unit(v));
        }
    }
    // Random sign flip so the map is not biased toward proper rotations.
    if rng.random::<bool>() {
        rows[0].iter_mut().for_each(|x| *x = -*x);
    }
    rows
}

fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter().map(|row| dot(row, x)).collect()
}
