//! Softmax classifier over reading levels.
//!
//! Distinct training levels become classes in ascending order. Ranking
//! evaluation uses the argmax level as is, so ties between documents of a
//! slug are possible and left to the metrics.

use serde::{Deserialize, Serialize};

use super::mlp::{softmax, MlpParams};
use super::nprm::add_l2;
use super::{sgd, Objective, TrainConfig, TrainLog};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::rng::rng_for;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub params: MlpParams,
    /// Level of each output class, ascending.
    pub classes: Vec<f64>,
}

impl ClassifierModel {
    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(softmax(&self.params.forward(x)?.output))
    }

    /// Index of the most probable class; the lowest index wins ties.
    pub fn predict_class(&self, x: &[f64]) -> Result<usize> {
        let p = self.predict_proba(x)?;
        let mut best = 0;
        for (i, &v) in p.iter().enumerate() {
            if v > p[best] {
                best = i;
            }
        }
        Ok(best)
    }

    pub fn predict_level(&self, x: &[f64]) -> Result<f64> {
        Ok(self.classes[self.predict_class(x)?])
    }

    /// Probability-weighted level, a continuous alternative to the argmax.
    pub fn expected_level(&self, x: &[f64]) -> Result<f64> {
        let p = self.predict_proba(x)?;
        Ok(p.iter().zip(&self.classes).map(|(p, l)| p * l).sum())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ClassExample<'a> {
    pub x: &'a [f64],
    pub class: usize,
}

/// Mean categorical cross-entropy plus `l2 * ||params||^2`, with its gradient.
pub fn cross_entropy_loss_and_gradient(
    params: &MlpParams,
    batch: &[&ClassExample],
    l2: f64,
) -> Result<(f64, MlpParams)> {
    let mut grad = params.same_shape();
    let loss = accumulate(params, batch, Some(&mut grad))?;
    Ok(add_l2(params, loss, grad, l2))
}

pub fn cross_entropy_loss(params: &MlpParams, batch: &[&ClassExample], l2: f64) -> Result<f64> {
    Ok(accumulate(params, batch, None)? + l2 * params.squared_norm())
}

fn accumulate(params: &MlpParams, batch: &[&ClassExample], mut grad: Option<&mut MlpParams>) -> Result<f64> {
    let n = batch.len() as f64;
    let mut total = 0.0;
    for ex in batch {
        let act = params.forward(ex.x)?;
        let logits = &act.output;
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
        total += log_z - logits[ex.class];
        if let Some(g) = grad.as_deref_mut() {
            let mut d: Vec<f64> = logits.iter().map(|l| (l - log_z).exp() / n).collect();
            d[ex.class] -= 1.0 / n;
            params.backward(ex.x, &act, &d, g);
        }
    }
    Ok(total / n)
}

struct CrossEntropy {
    l2: f64,
}

impl Objective<ClassExample<'_>> for CrossEntropy {
    fn loss(&self, params: &MlpParams, batch: &[&ClassExample]) -> Result<f64> {
        cross_entropy_loss(params, batch, self.l2)
    }

    fn loss_and_grad(&self, params: &MlpParams, batch: &[&ClassExample]) -> Result<(f64, MlpParams)> {
        cross_entropy_loss_and_gradient(params, batch, self.l2)
    }
}

pub fn train_classifier(corpus: &Corpus, docs: &[String], cfg: &TrainConfig) -> Result<(ClassifierModel, TrainLog)> {
    cfg.validate()?;
    if docs.is_empty() {
        return Err(Error::Config("empty training set".into()));
    }
    let rows = docs
        .iter()
        .map(|id| Ok((corpus.vector(id)?, corpus.level(id)?)))
        .collect::<Result<Vec<_>>>()?;
    let mut classes: Vec<f64> = rows.iter().map(|r| r.1).collect();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    if classes.len() < 2 {
        return Err(Error::Config("classifier needs at least two distinct levels".into()));
    }
    let examples: Vec<ClassExample> = rows
        .iter()
        .map(|&(x, level)| ClassExample {
            x,
            class: classes.iter().position(|&c| c == level).expect("level is a class"),
        })
        .collect();

    let dim = examples[0].x.len();
    let init = MlpParams::init(dim, cfg.hidden, classes.len(), &mut rng_for(cfg.seed, "classifier/init"));
    let (params, log) = sgd(init, &examples, cfg, "classifier", &CrossEntropy { l2: cfg.l2 })?;
    Ok((ClassifierModel { params, classes }, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_tie_takes_lowest_class() {
        let model = ClassifierModel {
            params: MlpParams::zeros(2, 1, 3),
            classes: vec![1.0, 2.0, 3.0],
        };
        let p = model.predict_proba(&[0.3, -0.2]).unwrap();
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(model.predict_class(&[0.3, -0.2]).unwrap(), 0);
        assert_eq!(model.predict_level(&[0.3, -0.2]).unwrap(), 1.0);
        assert!((model.expected_level(&[0.0, 0.0]).unwrap() - 2.0).abs() < 1e-12);
    }
}
