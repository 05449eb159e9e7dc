//! Slug-scoped pairwise training sets.
//!
//! Every ordered pair `(left, right)` of distinct documents retained from a
//! slug becomes one example, labeled "left is at least as hard" when
//! `level(left) >= level(right)`. Both orientations are always present.

use std::io::Write;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Slug};
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Levels retained per slug when the caller does not say otherwise.
pub const DEFAULT_LEVELS_PER_SLUG: usize = 3;

/// Two-way one-hot target. Serialized as `[1,0]` or `[0,1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairLabel {
    /// `[1, 0]`: level(left) >= level(right).
    LeftHarder,
    /// `[0, 1]`: level(left) < level(right).
    RightHarder,
}

impl PairLabel {
    pub fn from_levels(left: f64, right: f64) -> Self {
        if left >= right {
            PairLabel::LeftHarder
        } else {
            PairLabel::RightHarder
        }
    }

    pub fn one_hot(self) -> [f64; 2] {
        match self {
            PairLabel::LeftHarder => [1.0, 0.0],
            PairLabel::RightHarder => [0.0, 1.0],
        }
    }

    /// `+1` for `[1,0]`, `-1` for `[0,1]`.
    pub fn sign(self) -> f64 {
        match self {
            PairLabel::LeftHarder => 1.0,
            PairLabel::RightHarder => -1.0,
        }
    }
}

impl Serialize for PairLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let [a, b] = self.one_hot();
        [a as u8, b as u8].serialize(s)
    }
}

impl<'de> Deserialize<'de> for PairLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match <[u8; 2]>::deserialize(d)? {
            [1, 0] => Ok(PairLabel::LeftHarder),
            [0, 1] => Ok(PairLabel::RightHarder),
            other => Err(serde::de::Error::custom(format!("invalid pair label {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairExample {
    pub slug: String,
    pub left: String,
    pub right: String,
    pub label: PairLabel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSet {
    pub pairs: Vec<PairExample>,
    pub source_slugs: Vec<String>,
    /// Documents retained per slug.
    pub m: usize,
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Audit dump, one `{slug, left, right, label}` object per line.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> Result<()> {
        for p in &self.pairs {
            serde_json::to_writer(&mut out, p)?;
            out.write_all(b"\n").map_err(|e| Error::io("<writer>", e))?;
        }
        Ok(())
    }
}

/// Picks at most `m` members of a slug: the hardest document, the easiest
/// one, and `m - 2` drawn uniformly without replacement from documents with
/// strictly intermediate levels. Ties at the extremes go to the smallest
/// doc_id. The result is in the slug's canonical order.
pub fn subsample_slug(slug: &Slug, corpus: &Corpus, m: usize, seed: u64) -> Result<Vec<String>> {
    if m < 2 {
        return Err(Error::Config(format!("m must be at least 2, got {m}")));
    }
    if !slug.is_rankable() {
        return Err(Error::NotRankable(slug.slug_id.clone()));
    }
    if slug.members.len() <= m {
        return Ok(slug.members.clone());
    }

    let levels = slug
        .members
        .iter()
        .map(|id| corpus.level(id))
        .collect::<Result<Vec<f64>>>()?;
    let max = levels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = levels.iter().copied().fold(f64::INFINITY, f64::min);

    // Members are sorted by level descending then doc_id, so the first doc at
    // a given level has the smallest id.
    let mut keep = vec![false; slug.members.len()];
    if max == min {
        keep.iter_mut().take(m).for_each(|k| *k = true);
    } else {
        let hi = levels.iter().position(|&l| l == max).expect("max present");
        let lo = levels.iter().position(|&l| l == min).expect("min present");
        keep[hi] = true;
        keep[lo] = true;

        let mut rng = rng_for(seed, &format!("subsample/{}", slug.slug_id));
        let wanted = m - 2;
        let middle: Vec<usize> = (0..levels.len()).filter(|&i| levels[i] < max && levels[i] > min).collect();
        let picked = sample(&mut rng, &middle, wanted);
        picked.iter().for_each(|&i| keep[i] = true);

        // Too few intermediate documents: fill from the remaining extremes.
        if picked.len() < wanted {
            let rest: Vec<usize> = (0..levels.len()).filter(|&i| !keep[i]).collect();
            for i in sample(&mut rng, &rest, wanted - picked.len()) {
                keep[i] = true;
            }
        }
    }
    Ok(slug
        .members
        .iter()
        .zip(&keep)
        .filter(|(_, &k)| k)
        .map(|(id, _)| id.clone())
        .collect())
}

fn sample(rng: &mut crate::rng::Rng, from: &[usize], amount: usize) -> Vec<usize> {
    if amount >= from.len() {
        return from.to_vec();
    }
    let mut idx: Vec<usize> = index::sample(rng, from.len(), amount).into_iter().map(|i| from[i]).collect();
    idx.sort_unstable();
    idx
}

/// Both orientations of every pair among the retained documents of every
/// rankable slug. Output is sorted by slug, left, right.
pub fn build_pairset(corpus: &Corpus, m: usize, seed: u64) -> Result<PairSet> {
    let mut pairs = Vec::new();
    let mut source_slugs = Vec::new();
    for slug in corpus.rankable_slugs() {
        let kept = subsample_slug(slug, corpus, m, seed)?;
        let levels = kept.iter().map(|id| corpus.level(id)).collect::<Result<Vec<f64>>>()?;
        for (i, left) in kept.iter().enumerate() {
            for (j, right) in kept.iter().enumerate() {
                if i == j {
                    continue;
                }
                pairs.push(PairExample {
                    slug: slug.slug_id.clone(),
                    left: left.clone(),
                    right: right.clone(),
                    label: PairLabel::from_levels(levels[i], levels[j]),
                });
            }
        }
        source_slugs.push(slug.slug_id.clone());
    }
    if source_slugs.is_empty() {
        return Err(Error::NoRankableSlugs);
    }
    pairs.sort_by(|a, b| (&a.slug, &a.left, &a.right).cmp(&(&b.slug, &b.left, &b.right)));
    Ok(PairSet { pairs, source_slugs, m })
}
