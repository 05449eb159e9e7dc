//! Pointwise MLP regressor on reading level, trained with squared error.

use serde::{Deserialize, Serialize};

use super::mlp::MlpParams;
use super::nprm::add_l2;
use super::{sgd, Objective, TrainConfig, TrainLog};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::rng_for;

/// A regressor over standardized targets: `level = mean + scale * mlp(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressorModel {
    pub params: MlpParams,
    pub target_mean: f64,
    pub target_scale: f64,
}

impl RegressorModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let act = self.params.forward(x)?;
        Ok(self.target_mean + self.target_scale * act.output[0])
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PointExample<'a> {
    pub x: &'a [f64],
    pub y: f64,
}

/// Mean of `(mlp(x) - y)^2` plus `l2 * ||params||^2`, with its gradient.
pub fn mse_loss_and_gradient(params: &MlpParams, batch: &[&PointExample], l2: f64) -> Result<(f64, MlpParams)> {
    let mut grad = params.same_shape();
    let loss = accumulate(params, batch, Some(&mut grad))?;
    Ok(add_l2(params, loss, grad, l2))
}

pub fn mse_loss(params: &MlpParams, batch: &[&PointExample], l2: f64) -> Result<f64> {
    Ok(accumulate(params, batch, None)? + l2 * params.squared_norm())
}

fn accumulate(params: &MlpParams, batch: &[&PointExample], mut grad: Option<&mut MlpParams>) -> Result<f64> {
    let n = batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        let act = params.forward(ex.x)?;
        let err = act.output[0] - ex.y;
        total += err * err;
        if let Some(g) = grad.as_deref_mut() {
            params.backward(ex.x, &act, &[2.0 * err / n], g);
        }
    }
    Ok(total / n)
}

struct MseObjective {
    l2: f64,
}

impl Objective<PointExample<'_>> for MseObjective {
    fn loss(&self, params: &MlpParams, batch: &[&PointExample]) -> Result<f64> {
        mse_loss(params, batch, self.l2)
    }

    fn loss_and_grad(&self, params: &MlpParams, batch: &[&PointExample]) -> Result<(f64, MlpParams)> {
        mse_loss_and_gradient(params, batch, self.l2)
    }
}

pub fn train_regressor_mlp(corpus: &Corpus, docs: &[String], cfg: &TrainConfig) -> Result<(RegressorModel, TrainLog)> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let rows = docs
        .iter()
        .map(|id| Ok((corpus.vector(id)?, corpus.level(id)?)))
        .collect::<Result<Vec<_>>>()?;
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r.1).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r.1 - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let examples: Vec<PointExample> = rows
        .iter()
        .map(|&(x, y)| PointExample { x, y: (y - mean) / scale })
        .collect();

    let dim = examples[0].x.len();
    let init = MlpParams::init(dim, cfg.hidden, 1, &mut rng_for(cfg.seed, "regressor/init"));
    let objective = MseObjective { l2: cfg.l2 };
    let (params, log) = sgd(init, &examples, cfg, "regressor", &objective)?;
    Ok((
        RegressorModel {
            params,
            target_mean: mean,
            target_scale: scale,
        },
        log,
    ))
}
