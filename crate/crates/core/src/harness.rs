//! Experiment protocols: slug-level k-fold cross-validation, cross-corpus
//! transfer and cross-lingual transfer.
//!
//! Folds are made of whole slugs, so no document of a test slug ever reaches
//! training. Fold `i` trains with seed `seed + i`; the fold plan and pair
//! subsampling of a run are fixed by `seed` alone, which makes reports
//! byte-identical across runs with the same configuration.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::corpus::{featurize, load_corpus, load_embeddings, Corpus, CorpusFormat};
use crate::error::{Error, Result};
use crate::metrics::{
    classification_metrics, evaluate_corpus_with_shift, level_shift, regression_metrics, MetricOptions, MetricReport,
};
use crate::models::{
    train_classifier, train_nprm, train_ols, train_ranksvm, train_regressor_mlp, ModelFamily, TrainConfig,
    TrainLog, TrainedModel,
};
use crate::pairs::{build_pairset, PairSet, DEFAULT_LEVELS_PER_SLUG};
use crate::ranker::{predict_level, rank_with_model, RankingInput, ScoredRanking};
use crate::rng::rng_for;

/// RA below this on a cross-lingual run suggests unaligned embeddings.
pub const CROSS_LINGUAL_RA_WARNING: f64 = 0.6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub k: usize,
    pub seed: u64,
    /// Slug ids of each fold, ascending within a fold.
    pub folds: Vec<Vec<String>>,
}

impl FoldPlan {
    /// Slugs of every fold except `fold`.
    pub fn train_slugs(&self, fold: usize) -> Vec<String> {
        let mut out: Vec<String> = self
            .folds
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != fold)
            .flat_map(|(_, f)| f.iter().cloned())
            .collect();
        out.sort();
        out
    }
}

/// Shuffles the rankable slugs with `seed` and deals them round-robin, so
/// fold sizes differ by at most one.
pub fn make_folds(corpus: &Corpus, k: usize, seed: u64) -> Result<FoldPlan> {
    if k < 2 {
        return Err(Error::Config(format!("k must be at least 2, got {k}")));
    }
    let mut slugs: Vec<String> = corpus.rankable_slugs().map(|s| s.slug_id.clone()).collect();
    if slugs.len() < k {
        return Err(Error::Config(format!(
            "{} rankable slugs cannot fill {k} folds",
            slugs.len()
        )));
    }
    slugs.shuffle(&mut rng_for(seed, "folds"));
    let mut folds = vec![Vec::new(); k];
    for (i, s) in slugs.into_iter().enumerate() {
        folds[i % k].push(s);
    }
    folds.iter_mut().for_each(|f| f.sort());
    Ok(FoldPlan { k, seed, folds })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelFamily,
    pub train: TrainConfig,
    pub train_corpus: Option<PathBuf>,
    pub test_corpus: Option<PathBuf>,
    /// Embedding table for the training corpus, and for the test corpus
    /// unless `test_embeddings` is given.
    pub embeddings: Option<PathBuf>,
    pub test_embeddings: Option<PathBuf>,
    pub k: usize,
    /// Levels kept per slug when building pairs.
    pub m: usize,
    pub seed: u64,
    pub metrics: MetricOptions,
    pub train_lang: Option<String>,
    pub test_lang: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            model: ModelFamily::Nprm,
            train: TrainConfig::default(),
            train_corpus: None,
            test_corpus: None,
            embeddings: None,
            test_embeddings: None,
            k: 5,
            m: DEFAULT_LEVELS_PER_SLUG,
            seed: 0,
            metrics: MetricOptions::default(),
            train_lang: None,
            test_lang: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        if self.m < 2 {
            return Err(Error::Config(format!("m must be at least 2, got {}", self.m)));
        }
        Ok(())
    }

    /// Training configuration of fold `fold`.
    pub fn fold_train_config(&self, fold: usize) -> TrainConfig {
        TrainConfig {
            seed: self.seed.wrapping_add(fold as u64),
            ..self.train.clone()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentMode {
    CrossValidation,
    CrossCorpus,
    CrossLingual,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub seed: u64,
    pub train_slugs: Vec<String>,
    pub test_slugs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_train_pairs: Option<usize>,
    pub epoch_losses: Vec<f64>,
    pub report: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub mode: ExperimentMode,
    pub config: ExperimentConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_embedding_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_embedding_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub languages: Option<(String, String)>,
    pub folds: Vec<FoldReport>,
    pub pooled: MetricReport,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// A model with its training log and, for pairwise families, the pairs it
/// was trained on.
#[derive(Debug, Clone)]
pub struct Trained {
    pub model: TrainedModel,
    pub log: TrainLog,
    pub pairs: Option<PairSet>,
}

/// Trains `family` on every document of `corpus` (pointwise) or on pairs
/// from its rankable slugs (pairwise). Pair subsampling uses `pair_seed`.
pub fn train_model(
    family: ModelFamily,
    corpus: &Corpus,
    cfg: &TrainConfig,
    m: usize,
    pair_seed: u64,
) -> Result<Trained> {
    if !corpus.is_featurized() {
        return Err(Error::Config("training corpus has no document vectors".into()));
    }
    if family.is_pairwise() {
        let pairs = build_pairset(corpus, m, pair_seed)?;
        let (model, log) = match family {
            ModelFamily::Nprm => {
                let (m, log) = train_nprm(&pairs, corpus, cfg)?;
                (TrainedModel::Nprm(m), log)
            }
            _ => {
                let (p, log) = train_ranksvm(&pairs, corpus, cfg)?;
                (TrainedModel::Ranksvm(p), log)
            }
        };
        return Ok(Trained { model, log, pairs: Some(pairs) });
    }
    let docs: Vec<String> = corpus.canonical_order().map(|d| d.doc_id.clone()).collect();
    let (model, log) = match family {
        ModelFamily::Ols => (TrainedModel::Ols(train_ols(corpus, &docs)?), TrainLog::default()),
        ModelFamily::MlpRegressor => {
            let (m, log) = train_regressor_mlp(corpus, &docs, cfg)?;
            (TrainedModel::MlpRegressor(m), log)
        }
        _ => {
            let (m, log) = train_classifier(corpus, &docs, cfg)?;
            (TrainedModel::Classifier(m), log)
        }
    };
    Ok(Trained { model, log, pairs: None })
}

/// Rankings of every rankable slug plus pointwise predictions when the
/// model makes them.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub report: MetricReport,
    pub rankings: BTreeMap<String, ScoredRanking>,
    pub points: Option<PointPredictions>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointPredictions {
    pub truth: Vec<f64>,
    pub pred: Vec<f64>,
}

impl PointPredictions {
    fn extend(&mut self, other: &PointPredictions) {
        self.truth.extend_from_slice(&other.truth);
        self.pred.extend_from_slice(&other.pred);
    }
}

pub fn rank_corpus(model: &TrainedModel, corpus: &Corpus) -> Result<BTreeMap<String, ScoredRanking>> {
    if model.doc_dim() != corpus.dim() {
        return Err(Error::DimensionMismatch {
            expected: model.doc_dim(),
            found: corpus.dim(),
        });
    }
    corpus
        .rankable_slugs()
        .map(|s| Ok((s.slug_id.clone(), rank_with_model(model, &RankingInput::from_slug(corpus, &s.slug_id)?)?)))
        .collect()
}

pub fn evaluate_model(
    model: &TrainedModel,
    corpus: &Corpus,
    options: &MetricOptions,
    shift: f64,
) -> Result<Evaluation> {
    let rankings = rank_corpus(model, corpus)?;
    let mut report = evaluate_corpus_with_shift(&rankings, corpus, options, shift)?;
    let points = if model.family().is_pairwise() {
        None
    } else {
        let mut p = PointPredictions::default();
        for slug in corpus.rankable_slugs() {
            for id in &slug.members {
                p.truth.push(corpus.level(id)?);
                p.pred.push(predict_level(model, corpus.vector(id)?)?);
            }
        }
        attach_point_metrics(&mut report, model.family(), &p)?;
        Some(p)
    };
    Ok(Evaluation { report, rankings, points })
}

fn attach_point_metrics(report: &mut MetricReport, family: ModelFamily, p: &PointPredictions) -> Result<()> {
    match family {
        ModelFamily::Classifier => report.classification = Some(classification_metrics(&p.truth, &p.pred)?),
        ModelFamily::Ols | ModelFamily::MlpRegressor => {
            report.regression = Some(regression_metrics(&p.truth, &p.pred)?)
        }
        _ => {}
    }
    Ok(())
}

pub fn run_cv(corpus: &Corpus, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let plan = make_folds(corpus, cfg.k, cfg.seed)?;
    let shift = level_shift(corpus);
    let mut folds = Vec::with_capacity(plan.k);
    let mut points: Option<PointPredictions> = None;
    for (i, test_slugs) in plan.folds.iter().enumerate() {
        let run = || -> Result<(FoldReport, Option<PointPredictions>)> {
            let train_slugs = plan.train_slugs(i);
            let train = corpus.subset(train_slugs.iter().map(String::as_str))?;
            let test = corpus.subset(test_slugs.iter().map(String::as_str))?;
            let train_cfg = cfg.fold_train_config(i);
            log::info!("fold {i}: {} train slugs, {} test slugs", train_slugs.len(), test_slugs.len());
            let trained = train_model(cfg.model, &train, &train_cfg, cfg.m, train_cfg.seed)?;
            if let Some(pairs) = &trained.pairs {
                audit_pairs(pairs, test_slugs)?;
            }
            let eval = evaluate_model(&trained.model, &test, &cfg.metrics, shift)?;
            Ok((
                FoldReport {
                    fold: i,
                    seed: train_cfg.seed,
                    train_slugs,
                    test_slugs: test_slugs.clone(),
                    n_train_pairs: trained.pairs.as_ref().map(PairSet::len),
                    epoch_losses: trained.log.epoch_losses,
                    report: eval.report,
                },
                eval.points,
            ))
        };
        let (fold, p) = run().map_err(|e| Error::Fold { fold: i, source: Box::new(e) })?;
        if let Some(p) = p {
            points.get_or_insert_with(Default::default).extend(&p);
        }
        folds.push(fold);
    }
    let mut pooled = MetricReport::pool(folds.iter().map(|f| &f.report))?;
    if let Some(p) = &points {
        attach_point_metrics(&mut pooled, cfg.model, p)?;
    }
    Ok(ExperimentReport {
        mode: ExperimentMode::CrossValidation,
        config: cfg.clone(),
        train_embedding_id: corpus.embedding_id().map(str::to_string),
        test_embedding_id: None,
        languages: None,
        folds,
        pooled,
        warnings: Vec::new(),
    })
}

/// Fails if any training pair was drawn from a held-out slug.
fn audit_pairs(pairs: &PairSet, held_out: &[String]) -> Result<()> {
    let held: BTreeSet<&str> = held_out.iter().map(String::as_str).collect();
    match pairs.pairs.iter().find(|p| held.contains(p.slug.as_str())) {
        Some(p) => Err(Error::Config(format!("training pair drawn from held-out slug {}", p.slug))),
        None => Ok(()),
    }
}

/// Trains on all of `train` and evaluates on all of `test`.
pub fn run_cross_corpus(train: &Corpus, test: &Corpus, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    transfer(train, test, cfg, ExperimentMode::CrossCorpus)
}

/// Cross-corpus transfer between languages. Both corpora must live in one
/// embedding space; a low RA is reported as a likely alignment problem.
pub fn run_cross_lingual(train: &Corpus, test: &Corpus, cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let mut report = transfer(train, test, cfg, ExperimentMode::CrossLingual)?;
    let source = cfg.train_lang.clone().unwrap_or_else(|| majority_lang(train));
    let target = cfg.test_lang.clone().unwrap_or_else(|| majority_lang(test));
    if let Some(ra) = report.pooled.aggregates.ra {
        if ra < CROSS_LINGUAL_RA_WARNING {
            let msg = format!(
                "RA {ra:.3} on {source}->{target} is below {CROSS_LINGUAL_RA_WARNING}; check that both corpora use aligned embeddings"
            );
            log::warn!("{msg}");
            report.warnings.push(msg);
        }
    }
    report.languages = Some((source, target));
    Ok(report)
}

fn transfer(train: &Corpus, test: &Corpus, cfg: &ExperimentConfig, mode: ExperimentMode) -> Result<ExperimentReport> {
    cfg.validate()?;
    if train.dim() != test.dim() {
        return Err(Error::DimensionMismatch {
            expected: train.dim(),
            found: test.dim(),
        });
    }
    if let (Some(a), Some(b)) = (train.embedding_id(), test.embedding_id()) {
        if a != b {
            log::warn!("train and test corpora were embedded with different tables ({a} vs {b})");
        }
    }
    let train_cfg = cfg.fold_train_config(0);
    let trained = train_model(cfg.model, train, &train_cfg, cfg.m, train_cfg.seed)?;
    let eval = evaluate_model(&trained.model, test, &cfg.metrics, level_shift(test))?;
    let fold = FoldReport {
        fold: 0,
        seed: train_cfg.seed,
        train_slugs: train.rankable_slugs().map(|s| s.slug_id.clone()).collect(),
        test_slugs: test.rankable_slugs().map(|s| s.slug_id.clone()).collect(),
        n_train_pairs: trained.pairs.as_ref().map(PairSet::len),
        epoch_losses: trained.log.epoch_losses,
        report: eval.report.clone(),
    };
    Ok(ExperimentReport {
        mode,
        config: cfg.clone(),
        train_embedding_id: train.embedding_id().map(str::to_string),
        test_embedding_id: test.embedding_id().map(str::to_string),
        languages: None,
        folds: vec![fold],
        pooled: eval.report,
        warnings: Vec::new(),
    })
}

fn majority_lang(corpus: &Corpus) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for d in corpus.documents() {
        *counts.entry(d.lang.as_str()).or_default() += 1;
    }
    // Ties go to the alphabetically first language.
    counts
        .into_iter()
        .fold(None, |best: Option<(&str, usize)>, (l, c)| match best {
            Some((_, bc)) if bc >= c => best,
            _ => Some((l, c)),
        })
        .map_or_else(|| "und".to_string(), |(l, _)| l.to_string())
}

/// Loads and featurizes a corpus. Without an embedding table, every
/// document must carry a vector.
pub fn load_featurized(corpus: &Path, embeddings: Option<&Path>) -> Result<Corpus> {
    let c = load_corpus(corpus, CorpusFormat::Jsonl)?;
    match embeddings {
        Some(e) => featurize(&c, &load_embeddings(e)?),
        None if c.is_featurized() => Ok(c),
        None => Err(Error::Config(format!(
            "{} has documents without vectors and no embedding table was given",
            corpus.display()
        ))),
    }
}

fn required<'a>(p: &'a Option<PathBuf>, name: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| Error::Config(format!("{name} is required")))
}

pub fn run_cv_from_config(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let corpus = load_featurized(required(&cfg.train_corpus, "train_corpus")?, cfg.embeddings.as_deref())?;
    run_cv(&corpus, cfg)
}

fn load_pair(cfg: &ExperimentConfig) -> Result<(Corpus, Corpus)> {
    let train = load_featurized(required(&cfg.train_corpus, "train_corpus")?, cfg.embeddings.as_deref())?;
    let test_emb = cfg.test_embeddings.as_deref().or(cfg.embeddings.as_deref());
    let test = load_featurized(required(&cfg.test_corpus, "test_corpus")?, test_emb)?;
    Ok((train, test))
}

pub fn run_cross_corpus_from_config(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (train, test) = load_pair(cfg)?;
    run_cross_corpus(&train, &test, cfg)
}

pub fn run_cross_lingual_from_config(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let (train, test) = load_pair(cfg)?;
    run_cross_lingual(&train, &test, cfg)
}
