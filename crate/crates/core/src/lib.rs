//! Learning-to-rank toolkit for readability assessment.
//!
//! Documents grouped into slugs (the same content written at several reading
//! levels) are embedded, turned into labeled pairs, and used to train a
//! neural pairwise ranker and several baselines. Rankings are scored with
//! NDCG, Spearman, Kendall tau-b and ranking accuracy, and models are
//! compared with a paired Wilcoxon signed-rank test.

pub mod corpus;
pub mod error;
pub mod harness;
pub mod metrics;
pub mod models;
pub mod pairs;
pub mod ranker;
pub mod rng;
pub mod stats;
pub mod synth;

pub use corpus::{featurize, load_corpus, load_embeddings, Corpus, CorpusFormat, Document, EmbeddingTable, Slug};
pub use error::{Error, Result};
pub use harness::{run_cross_corpus, run_cross_lingual, run_cv, ExperimentConfig, ExperimentReport};
pub use metrics::{MetricId, MetricOptions, MetricReport};
pub use models::{ModelFamily, ModelFile, TrainConfig, TrainedModel};
pub use pairs::{build_pairset, PairExample, PairLabel, PairSet};
pub use ranker::{rank_with_model, RankingInput, ScoredRanking};
pub use stats::{compare_models, wilcoxon_signed_rank, ComparisonReport, PairedSample};
