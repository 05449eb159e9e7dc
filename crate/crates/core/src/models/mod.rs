//! Trainable scorers: the neural pairwise ranker and its baselines.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

pub mod classifier;
pub mod linear;
pub mod mlp;
pub mod nprm;
pub mod regressor;

pub use classifier::{train_classifier, ClassifierModel};
pub use linear::{train_ols, train_ranksvm, LinearParams};
pub use mlp::MlpParams;
pub use nprm::{
    nprm_gradient, nprm_loss, nprm_loss_and_gradient, pair_features, pairwise_logistic_loss, train_nprm,
    Combiner, NprmModel, PairScore,
};
pub use regressor::{train_regressor_mlp, RegressorModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub hidden: usize,
    pub l2: f64,
    pub combiner: Combiner,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 30,
            batch_size: 32,
            seed: 0,
            hidden: 64,
            l2: 1e-4,
            combiner: Combiner::ConcatDiff,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden width must be at least 1".into()));
        }
        if !(self.l2 >= 0.0 && self.l2.is_finite()) {
            return Err(Error::Config(format!("l2 must be non-negative, got {}", self.l2)));
        }
        Ok(())
    }
}

/// Objective value after each epoch, over the full training set.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub epoch_losses: Vec<f64>,
}

pub(crate) trait Objective<E> {
    fn loss(&self, params: &MlpParams, batch: &[&E]) -> Result<f64>;
    fn loss_and_grad(&self, params: &MlpParams, batch: &[&E]) -> Result<(f64, MlpParams)>;
}

/// Plain minibatch SGD with a seeded reshuffle every epoch.
pub(crate) fn sgd<E, O: Objective<E>>(
    mut params: MlpParams,
    examples: &[E],
    cfg: &TrainConfig,
    tag: &str,
    objective: &O,
) -> Result<(MlpParams, TrainLog)> {
    let mut rng = rng_for(cfg.seed, &format!("{tag}/shuffle"));
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let all: Vec<&E> = examples.iter().collect();
    let mut log = TrainLog::default();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&E> = chunk.iter().map(|&i| &examples[i]).collect();
            let (_, grad) = objective
                .loss_and_grad(&params, &batch)
                .map_err(|e| diverged_or(e, epoch))?;
            params.axpy(-cfg.learning_rate, &grad);
            if !params.is_finite() {
                return Err(Error::Diverged { epoch, loss: f64::NAN });
            }
        }
        let loss = objective.loss(&params, &all).map_err(|e| diverged_or(e, epoch))?;
        if !loss.is_finite() {
            return Err(Error::Diverged { epoch, loss });
        }
        log.epoch_losses.push(loss);
    }
    Ok((params, log))
}

fn diverged_or(e: Error, epoch: usize) -> Error {
    match e {
        Error::NonFinite(_) => Error::Diverged { epoch, loss: f64::NAN },
        other => other,
    }
}

/// Model families the harness can train.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    Nprm,
    Ranksvm,
    Ols,
    MlpRegressor,
    Classifier,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::Nprm,
        ModelFamily::Ranksvm,
        ModelFamily::Ols,
        ModelFamily::MlpRegressor,
        ModelFamily::Classifier,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelFamily::Nprm => "nprm",
            ModelFamily::Ranksvm => "ranksvm",
            ModelFamily::Ols => "ols",
            ModelFamily::MlpRegressor => "mlp-regressor",
            ModelFamily::Classifier => "classifier",
        }
    }

    pub fn is_pairwise(self) -> bool {
        matches!(self, ModelFamily::Nprm | ModelFamily::Ranksvm)
    }
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown model family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TrainedModel {
    Nprm(NprmModel),
    Ranksvm(LinearParams),
    Ols(LinearParams),
    MlpRegressor(RegressorModel),
    Classifier(ClassifierModel),
}

impl TrainedModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            TrainedModel::Nprm(_) => ModelFamily::Nprm,
            TrainedModel::Ranksvm(_) => ModelFamily::Ranksvm,
            TrainedModel::Ols(_) => ModelFamily::Ols,
            TrainedModel::MlpRegressor(_) => ModelFamily::MlpRegressor,
            TrainedModel::Classifier(_) => ModelFamily::Classifier,
        }
    }

    /// Dimension of the document vectors the model consumes.
    pub fn doc_dim(&self) -> usize {
        match self {
            TrainedModel::Nprm(m) => m.doc_dim(),
            TrainedModel::Ranksvm(p) | TrainedModel::Ols(p) => p.weights.len(),
            TrainedModel::MlpRegressor(m) => m.params.input_dim,
            TrainedModel::Classifier(m) => m.params.input_dim,
        }
    }
}

/// On-disk model: architecture, provenance and weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format_version: u32,
    pub seed: u64,
    pub m: usize,
    pub config: TrainConfig,
    pub model: TrainedModel,
    #[serde(default)]
    pub log: TrainLog,
}

impl ModelFile {
    pub const FORMAT_VERSION: u32 = 1;

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mf: ModelFile = serde_json::from_reader(BufReader::new(file))?;
        if mf.format_version != Self::FORMAT_VERSION {
            return Err(Error::Config(format!("unsupported model format version {}", mf.format_version)));
        }
        Ok(mf)
    }
}
