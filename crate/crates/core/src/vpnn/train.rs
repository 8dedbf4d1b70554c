//! Minibatch Adam training with periodic evaluation and best-checkpoint
//! selection.

use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::adam::Adam;
use super::network::{DropoutKey, Network, NetworkConfig};
use crate::error::{Error, Result};
use crate::rng;
use crate::trajectory::Sample;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Evaluate and record losses every this many iterations.
    pub log_every: usize,
    /// At most this many samples of each split are used for the recorded
    /// losses.
    pub eval_cap: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            learning_rate: 1e-4,
            iterations: 3000,
            batch_size: 512,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            log_every: 50,
            eval_cap: 4096,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidParams("learning rate must be finite and non-negative".into()));
        }
        if self.iterations == 0 || self.batch_size == 0 || self.log_every == 0 || self.eval_cap == 0 {
            return Err(Error::InvalidParams(
                "iterations, batch size, logging interval and eval cap must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Mean per-sample losses at one iteration (eval mode).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub iteration: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    /// Parameters at the record with the lowest validation loss (training
    /// loss when there is no validation set).
    pub network: Network,
    pub best_iteration: usize,
    pub history: Vec<LossRecord>,
}

fn eval_subset(samples: &[Sample], cap: usize, seed: u64, name: &str) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..samples.len()).collect();
    if idx.len() > cap {
        idx.shuffle(&mut rng::stream(seed, name));
        idx.truncate(cap);
        idx.sort_unstable();
    }
    idx
}

fn mean_loss(net: &Network, samples: &[Sample], idx: &[usize]) -> Result<f64> {
    let batch: Vec<&Sample> = idx.iter().map(|&i| &samples[i]).collect();
    Ok(net.loss(&batch)? / batch.len() as f64)
}

/// Trains a freshly initialized network.
pub fn train(train: &[Sample], val: &[Sample], net: NetworkConfig, cfg: &TrainingConfig) -> Result<TrainingOutcome> {
    let init = Network::init(net, cfg.seed)?;
    train_from(init, train, val, cfg)
}

/// Continues training from `network`.
pub fn train_from(network: Network, train: &[Sample], val: &[Sample], cfg: &TrainingConfig) -> Result<TrainingOutcome> {
    cfg.validate()?;
    if train.is_empty() {
        return Err(Error::Precondition("no training samples".into()));
    }
    let mut net = network;
    let mut adam = Adam::new(net.param_count(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon);
    let train_eval = eval_subset(train, cfg.eval_cap, cfg.seed, "eval-train");
    let val_eval = eval_subset(val, cfg.eval_cap, cfg.seed, "eval-val");

    let mut history = Vec::new();
    let mut best: Option<(f64, usize, Vec<f64>)> = None;
    let mut record = |it: usize, net: &Network, history: &mut Vec<LossRecord>| -> Result<()> {
        let train_loss = mean_loss(net, train, &train_eval)?;
        let val_loss = if val_eval.is_empty() {
            None
        } else {
            Some(mean_loss(net, val, &val_eval)?)
        };
        let score = val_loss.unwrap_or(train_loss);
        if !score.is_finite() {
            return Err(Error::Diverged { iteration: it, loss: score });
        }
        log::info!(
            "iteration {it}: train {train_loss:.5}{}",
            val_loss.map(|v| format!(", val {v:.5}")).unwrap_or_default()
        );
        history.push(LossRecord {
            iteration: it,
            train_loss,
            val_loss,
        });
        if best.as_ref().is_none_or(|(b, _, _)| score < *b) {
            best = Some((score, it, net.params().to_vec()));
        }
        Ok(())
    };
    record(0, &net, &mut history)?;

    let mut order: Vec<usize> = Vec::new();
    let mut cursor = 0;
    let mut epoch = 0u64;
    let bs = cfg.batch_size.min(train.len());
    for it in 1..=cfg.iterations {
        let mut batch = Vec::with_capacity(bs);
        while batch.len() < bs {
            if cursor == order.len() {
                order = (0..train.len()).collect();
                order.shuffle(&mut rng::indexed_stream(cfg.seed, "epoch", &[epoch]));
                epoch += 1;
                cursor = 0;
            }
            batch.push(&train[order[cursor]]);
            cursor += 1;
        }
        let key = DropoutKey {
            seed: cfg.seed,
            iteration: it as u64,
        };
        let (loss, grad) = net.loss_and_gradient(&batch, Some(key))?;
        if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Diverged { iteration: it, loss });
        }
        adam.step(net.params_mut(), &grad);
        if net.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Diverged { iteration: it, loss });
        }
        if it % cfg.log_every == 0 || it == cfg.iterations {
            record(it, &net, &mut history)?;
        }
    }
    let (_, best_iteration, params) = best.expect("initial record exists");
    let network = Network::from_params(net.config().clone(), params)?;
    Ok(TrainingOutcome {
        network,
        best_iteration,
        history,
    })
}

/// Writes `iteration,train_loss,val_loss` rows, preceded by optional `#`
/// comment lines.
pub fn write_loss_history(path: impl AsRef<Path>, history: &[LossRecord], comments: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for c in comments {
        text.push_str(&format!("# {c}\n"));
    }
    text.push_str("iteration,train_loss,val_loss\n");
    for r in history {
        let val = r.val_loss.map(|v| v.to_string()).unwrap_or_default();
        text.push_str(&format!("{},{},{}\n", r.iteration, r.train_loss, val));
    }
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}
