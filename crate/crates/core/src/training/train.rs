use std::time::Instant;

use rand::seq::SliceRandom;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::adam::{adam_step, AdamState};
use super::config::{Regime, TrainConfig};
use super::loss::{loss, loss_and_grad};
use super::models::Models;
use crate::error::{Error, Result};
use crate::nets::ModelFile;
use crate::parallel::{Execution, CHUNK};
use crate::state::{Pair, TrajectoryDataset};

pub const LEARN_BOTH_WARNING: &str = "G and F were learned jointly. The residuals are unchanged by rescaling (G, F), \
by affine shifts of G and by coordinate-temperature shifts, so the learned pair is determined only up to these \
transformations and need not match the true fields.";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub lr: f64,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    /// Next epoch to run.
    pub epoch: usize,
    pub theta: Vec<f64>,
    pub adam: AdamState,
    pub best_loss: f64,
    pub best_theta: Vec<f64>,
    pub history: Vec<EpochRecord>,
}

impl TrainState {
    pub fn new(theta: Vec<f64>) -> Self {
        TrainState {
            epoch: 0,
            adam: AdamState::new(theta.len()),
            best_loss: f64::INFINITY,
            best_theta: theta.clone(),
            theta,
            history: Vec::new(),
        }
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Autodiff against central differences on a few parameter coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheck {
    pub coordinates: Vec<usize>,
    pub max_rel_err: f64,
    pub pairs: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainReport {
    pub regime: Regime,
    pub history: Vec<EpochRecord>,
    pub initial_loss: f64,
    /// Loss after the last update.
    pub final_loss: f64,
    pub best_loss: f64,
    pub g_model: Option<ModelFile>,
    pub f_models: Vec<ModelFile>,
    pub wall_time_s: f64,
    pub grad_check: Option<GradCheck>,
    pub warning: Option<String>,
}

impl TrainReport {
    /// `log10(initial / best)`.
    pub fn orders_of_reduction(&self) -> f64 {
        (self.initial_loss / self.best_loss).log10()
    }
}

fn subset(d: &TrajectoryDataset, pairs: Vec<Pair>) -> TrajectoryDataset {
    TrajectoryDataset { layout: d.layout, pairs, meta: d.meta.clone() }
}

/// Mini-batches of one epoch: a seeded shuffle of the pairs cut into pieces of `b`.
fn batches_for(d: &TrajectoryDataset, b: usize, seed: u64, epoch: usize) -> Vec<TrajectoryDataset> {
    let mut idx: Vec<usize> = (0..d.pairs.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (epoch as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    idx.shuffle(&mut rng);
    idx.chunks(b).map(|c| subset(d, c.iter().map(|&i| d.pairs[i].clone()).collect())).collect()
}

pub fn gradient_check(models: &Models, d: &TrajectoryDataset, cfg: &TrainConfig, exec: Execution) -> Result<GradCheck> {
    let opts = cfg.integrator_options();
    let small = subset(d, d.pairs.iter().take(CHUNK).cloned().collect());
    let theta = models.theta();
    let (_, grad) = loss_and_grad(&models.loss_model(), &theta, &small, &opts, exec)?;
    let n = theta.len();
    let coordinates: Vec<usize> = if n == 0 { Vec::new() } else { (0..5).map(|k| k * (n - 1) / 4).collect() };
    let mut max_rel_err: f64 = 0.0;
    let mut probe = models.clone();
    for &i in &coordinates {
        let step = 1e-6 * theta[i].abs().max(1.0);
        let mut eval = |x: f64| -> Result<f64> {
            let mut t = theta.clone();
            t[i] = x;
            probe.set_theta(&t)?;
            loss(probe.g(), probe.f(), &small, &opts, exec)
        };
        let fd = (eval(theta[i] + step)? - eval(theta[i] - step)?) / (2.0 * step);
        let scale = fd.abs().max(grad[i].abs()).max(1e-8);
        max_rel_err = max_rel_err.max((fd - grad[i]).abs() / scale);
    }
    Ok(GradCheck { coordinates, max_rel_err, pairs: small.pairs.len() })
}

/// Full training run from scratch.
pub fn train(cfg: &TrainConfig, d: &TrajectoryDataset, exec: Execution) -> Result<(TrainReport, Models)> {
    let mut models = Models::for_config(cfg)?;
    let state = TrainState::new(models.theta());
    let report = train_from(cfg, d, exec, &mut models, state, &mut |_| Ok(()))?;
    Ok((report, models))
}

/// Runs epochs `state.epoch..cfg.epochs`, calling `checkpoint` every
/// `cfg.checkpoint_every` epochs and at the end. On a nonfinite loss the last
/// good state is handed to `checkpoint` before the error is returned.
///
/// `models` ends up holding the best parameters seen.
pub fn train_from(
    cfg: &TrainConfig,
    d: &TrajectoryDataset,
    exec: Execution,
    models: &mut Models,
    mut state: TrainState,
    checkpoint: &mut dyn FnMut(&TrainState) -> Result<()>,
) -> Result<TrainReport> {
    cfg.validate()?;
    let started = Instant::now();
    let opts = cfg.integrator_options();
    if d.layout != models.system().layout() {
        return Err(Error::Invalid(format!(
            "dataset layout {:?} does not match system `{}`",
            d.layout,
            models.system().name()
        )));
    }
    if state.theta.len() != models.theta().len() {
        return Err(Error::ArityMismatch { expected: models.theta().len(), got: state.theta.len() });
    }
    models.set_theta(&state.theta)?;
    let grad_check = if cfg.grad_check && state.epoch == 0 && !state.theta.is_empty() {
        Some(gradient_check(models, d, cfg, exec)?)
    } else {
        None
    };
    let initial_loss = match state.history.first() {
        Some(r) => r.loss,
        None => {
            models.set_theta(&state.theta)?;
            loss(models.g(), models.f(), d, &opts, exec)?
        }
    };
    while state.epoch < cfg.epochs {
        let epoch = state.epoch;
        let lr = cfg.learning_rate(epoch);
        let batches = match cfg.batch {
            Some(b) if b < d.pairs.len() => batches_for(d, b, cfg.seed, epoch),
            _ => Vec::new(),
        };
        // loss at the parameters the epoch starts from
        let (l, full_grad) = if batches.is_empty() {
            let (l, g) = loss_and_grad(&models.loss_model(), &state.theta, d, &opts, exec)?;
            (l, Some(g))
        } else {
            models.set_theta(&state.theta)?;
            (loss(models.g(), models.f(), d, &opts, exec)?, None)
        };
        if !l.is_finite() || full_grad.as_ref().is_some_and(|g| g.iter().any(|x| !x.is_finite())) {
            checkpoint(&state)?;
            models.set_theta(&state.best_theta)?;
            return Err(Error::NonfiniteLoss { epoch });
        }
        state.history.push(EpochRecord { epoch, loss: l, lr });
        if l < state.best_loss {
            state.best_loss = l;
            state.best_theta = state.theta.clone();
        }
        let mut theta = state.theta.clone();
        let mut adam = state.adam.clone();
        match full_grad {
            Some(g) => adam_step(&mut theta, &g, &mut adam, lr)?,
            None => {
                for batch in &batches {
                    let (bl, g) = loss_and_grad(&models.loss_model(), &theta, batch, &opts, exec)?;
                    if !bl.is_finite() || g.iter().any(|x| !x.is_finite()) {
                        checkpoint(&state)?;
                        models.set_theta(&state.best_theta)?;
                        return Err(Error::NonfiniteLoss { epoch });
                    }
                    adam_step(&mut theta, &g, &mut adam, lr)?;
                }
            }
        }
        state.theta = theta;
        state.adam = adam;
        state.epoch += 1;
        if cfg.checkpoint_every > 0 && state.epoch % cfg.checkpoint_every == 0 && state.epoch < cfg.epochs {
            checkpoint(&state)?;
        }
    }
    models.set_theta(&state.theta)?;
    let final_loss = loss(models.g(), models.f(), d, &opts, exec)?;
    if !final_loss.is_finite() {
        checkpoint(&state)?;
        models.set_theta(&state.best_theta)?;
        return Err(Error::NonfiniteLoss { epoch: state.epoch });
    }
    if final_loss < state.best_loss {
        state.best_loss = final_loss;
        state.best_theta = state.theta.clone();
    }
    checkpoint(&state)?;
    models.set_theta(&state.best_theta)?;
    Ok(TrainReport {
        regime: cfg.regime,
        history: state.history.clone(),
        initial_loss,
        final_loss,
        best_loss: state.best_loss,
        g_model: models.g_file(),
        f_models: models.f_files(),
        wall_time_s: started.elapsed().as_secs_f64(),
        grad_check,
        warning: (cfg.regime == Regime::LearnBoth).then(|| LEARN_BOTH_WARNING.to_string()),
    })
}
