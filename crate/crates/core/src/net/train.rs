//! Mini-batch training with Adam and an inverse-time learning-rate decay.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::NetworkConfig;
use super::model::{backward_with_graphs, GraphSet, Init, NetworkWeights};
use crate::dataset::DatasetBundle;
use crate::error::{Error, Result};
use crate::geometry::PointCloud;
use crate::rng::Rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainHyper {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr: f64,
    /// Learning rate at epoch `e` is `lr / (1 + decay·e)`.
    pub decay: f64,
    pub seed: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for TrainHyper {
    fn default() -> Self {
        TrainHyper {
            batch_size: 32,
            epochs: 50,
            lr: 5e-4,
            decay: 0.05,
            seed: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl TrainHyper {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.lr / (1.0 + self.decay * epoch as f64)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_loss: f64,
    pub lr: f64,
}

/// Adam moment estimates over the flat parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl Adam {
    pub fn new(n: usize) -> Adam {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn update(&mut self, params: &mut [f64], grad: &[f64], lr: f64, h: &TrainHyper) {
        self.step += 1;
        let c1 = 1.0 - h.beta1.powi(self.step as i32);
        let c2 = 1.0 - h.beta2.powi(self.step as i32);
        for i in 0..params.len() {
            self.m[i] = h.beta1 * self.m[i] + (1.0 - h.beta1) * grad[i];
            self.v[i] = h.beta2 * self.v[i] + (1.0 - h.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + h.eps);
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub weights: NetworkWeights,
    pub history: Vec<EpochRecord>,
    pub optimizer: Adam,
}

/// Train a freshly initialized network on a bundle.
pub fn train(config: &NetworkConfig, bundle: &DatasetBundle, hyper: &TrainHyper, init: Init) -> Result<TrainOutcome> {
    if bundle.samples.is_empty() {
        return Err(Error::Infeasible("cannot train on an empty bundle".into()));
    }
    if bundle.manifest.r != config.r {
        return Err(Error::Shape(format!(
            "bundle ratio {} differs from network ratio {}",
            bundle.manifest.r, config.r
        )));
    }
    let pairs: Vec<(PointCloud, PointCloud)> = bundle
        .samples
        .iter()
        .map(|s| (s.input.clone(), s.target.clone()))
        .collect();
    let initial = NetworkWeights::init(config, init, Rng::new(hyper.seed).child(0).next_u64());
    train_pairs(config, &pairs, hyper, initial)
}

/// Train from given initial weights on `(input, target)` pairs.
pub fn train_pairs(
    config: &NetworkConfig,
    pairs: &[(PointCloud, PointCloud)],
    hyper: &TrainHyper,
    initial: NetworkWeights,
) -> Result<TrainOutcome> {
    config.validate()?;
    initial.check_against(config)?;
    if pairs.is_empty() {
        return Err(Error::Infeasible("no training pairs".into()));
    }
    if hyper.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    for (i, t) in pairs {
        if t.len() != i.len() * config.r {
            return Err(Error::Shape(format!(
                "pair has {} inputs and {} targets, ratio must be {}",
                i.len(),
                t.len(),
                config.r
            )));
        }
    }
    let graphs: Vec<GraphSet> = pairs
        .par_iter()
        .map(|(input, _)| GraphSet::build(config, input))
        .collect::<Result<_>>()?;

    let mut weights = initial;
    let mut params = weights.to_flat();
    let mut adam = Adam::new(params.len());
    let mut history = Vec::with_capacity(hyper.epochs);
    let order_rng = Rng::new(hyper.seed).child(1);
    for epoch in 0..hyper.epochs {
        let lr = hyper.lr_at(epoch);
        let mut order: Vec<usize> = (0..pairs.len()).collect();
        order_rng.child(epoch as u64).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for batch in order.chunks(hyper.batch_size) {
            let results: Vec<(f64, NetworkWeights)> = batch
                .par_iter()
                .map(|&i| backward_with_graphs(config, &weights, &pairs[i].0, &pairs[i].1, &graphs[i]))
                .collect::<Result<_>>()
                .map_err(|e| match e {
                    Error::Numeric(m) => Error::Numeric(format!("epoch {epoch}: {m}")),
                    other => other,
                })?;
            // fixed-order reduction
            let mut grad = vec![0.0; params.len()];
            for (loss, g) in &results {
                loss_sum += loss;
                for (a, b) in grad.iter_mut().zip(g.to_flat()) {
                    *a += b;
                }
            }
            let inv = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= inv);
            adam.update(&mut params, &grad, lr, hyper);
            if !params.iter().all(|p| p.is_finite()) {
                return Err(Error::Numeric(format!("epoch {epoch}: parameters diverged")));
            }
            weights.set_flat(&params)?;
        }
        history.push(EpochRecord {
            epoch,
            mean_loss: loss_sum / pairs.len() as f64,
            lr,
        });
    }
    Ok(TrainOutcome {
        weights,
        history,
        optimizer: adam,
    })
}

/// CSV `epoch,mean_loss,lr`.
pub fn history_csv(history: &[EpochRecord]) -> String {
    let mut s = String::from("epoch,mean_loss,lr\n");
    for h in history {
        let _ = writeln!(s, "{},{:e},{:e}", h.epoch, h.mean_loss, h.lr);
    }
    s
}

pub fn write_history_csv(history: &[EpochRecord], path: &Path) -> Result<()> {
    std::fs::write(path, history_csv(history)).map_err(|e| Error::io(path, e))
}
