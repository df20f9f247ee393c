use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrators::{EntropyVelocity, IntegratorOptions};
use crate::nets::Activation;
use crate::systems::{RigidBodyParams, SamplingBox, System, PistonParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    /// Unknown `G`, exact friction.
    #[serde(rename = "learn_G")]
    LearnG,
    /// Exact `G`, unknown friction.
    #[serde(rename = "learn_F")]
    LearnF,
    #[serde(rename = "learn_both")]
    LearnBoth,
}

impl Regime {
    pub fn learns_g(self) -> bool {
        matches!(self, Regime::LearnG | Regime::LearnBoth)
    }

    pub fn learns_f(self) -> bool {
        matches!(self, Regime::LearnF | Regime::LearnBoth)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_traj: usize,
    pub traj_len: usize,
    pub h: f64,
    /// Defaults to the system's box.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampling_box: Option<SamplingBox>,
    #[serde(default = "default_rtol")]
    pub rtol: f64,
    #[serde(default = "default_atol")]
    pub atol: f64,
}

fn default_rtol() -> f64 {
    1e-10
}

fn default_atol() -> f64 {
    1e-12
}

fn default_newton_tol() -> f64 {
    1e-11
}

fn default_hidden() -> Vec<usize> {
    vec![24, 24, 24]
}

fn default_checkpoint_every() -> usize {
    100
}

fn default_eval_steps() -> usize {
    100
}

fn default_grad_check() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub system: String,
    /// System parameter overrides keyed by field name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<serde_json::Value>,
    pub regime: Regime,
    pub epochs: usize,
    pub lr_init: f64,
    pub lr_final: f64,
    /// Pairs per Adam step; full batch when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_newton_tol")]
    pub newton_tol: f64,
    pub dataset: DatasetSpec,
    #[serde(default = "default_hidden")]
    pub hidden: Vec<usize>,
    #[serde(default)]
    pub activation: Activation,
    #[serde(default)]
    pub force_midpoint: bool,
    #[serde(default)]
    pub entropy_velocity: EntropyVelocity,
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    /// Steps of the reconstruction check run after training.
    #[serde(default = "default_eval_steps")]
    pub eval_steps: usize,
    #[serde(default = "default_grad_check")]
    pub grad_check: bool,
}

impl TrainConfig {
    pub fn preset(system: &str, regime: Regime, preset: Preset) -> Result<Self> {
        let sys = System::by_name(system)?;
        let (epochs, lr_init, lr_final, n_traj) = match (&sys, regime, preset) {
            (System::Piston(_), Regime::LearnG, Preset::Paper) => (100_000, 1e-3, 1e-3, 200),
            (System::Piston(_), _, Preset::Paper) => (50_000, 1e-3, 1e-4, 200),
            (System::RigidBody(_), Regime::LearnG, Preset::Paper) => (5_000, 1e-2, 1e-2, 100),
            (System::RigidBody(_), _, Preset::Paper) => (300_000, 1e-2, 1e-4, 100),
            (_, _, Preset::Desk) => (5_000, 3e-3, 3e-4, 25),
        };
        Ok(TrainConfig {
            system: system.to_string(),
            params: None,
            regime,
            epochs,
            lr_init,
            lr_final,
            batch: (preset == Preset::Desk).then_some(64),
            seed: 0,
            newton_tol: default_newton_tol(),
            dataset: DatasetSpec {
                n_traj,
                traj_len: 21,
                h: 0.1,
                sampling_box: None,
                rtol: default_rtol(),
                atol: default_atol(),
            },
            hidden: default_hidden(),
            activation: match preset {
                Preset::Paper => Activation::Sigmoid,
                Preset::Desk => Activation::Tanh,
            },
            force_midpoint: false,
            entropy_velocity: EntropyVelocity::State,
            checkpoint_every: default_checkpoint_every(),
            eval_steps: default_eval_steps(),
            grad_check: true,
        })
    }

    /// The configured system with parameter overrides applied.
    pub fn system(&self) -> Result<System> {
        let sys = System::by_name(&self.system)?;
        let overrides = self.params.clone().unwrap_or(serde_json::Value::Object(Default::default()));
        let bad = |e: serde_json::Error| Error::Invalid(format!("system parameters: {e}"));
        let sys = match sys {
            System::Piston(_) => System::Piston(serde_json::from_value::<PistonParams>(overrides).map_err(bad)?),
            System::RigidBody(_) => {
                System::RigidBody(serde_json::from_value::<RigidBodyParams>(overrides).map_err(bad)?)
            }
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn integrator_options(&self) -> IntegratorOptions {
        IntegratorOptions {
            newton_tol: self.newton_tol,
            force_midpoint: self.force_midpoint,
            entropy_velocity: self.entropy_velocity,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.system()?;
        if !(self.lr_init > 0.0 && self.lr_final > 0.0 && self.lr_final <= self.lr_init) {
            return Err(Error::Invalid("learning rates must satisfy 0 < lr_final <= lr_init".into()));
        }
        let d = &self.dataset;
        if d.n_traj == 0 || d.traj_len < 2 || !(d.h > 0.0) {
            return Err(Error::Invalid("dataset needs n_traj >= 1, traj_len >= 2 and h > 0".into()));
        }
        if !(d.rtol > 0.0 && d.atol > 0.0 && self.newton_tol > 0.0) {
            return Err(Error::Invalid("tolerances must be positive".into()));
        }
        if self.batch == Some(0) {
            return Err(Error::Invalid("batch must be positive".into()));
        }
        Ok(())
    }

    /// `lr_init·(lr_final/lr_init)^(e/(epochs−1))`.
    pub fn learning_rate(&self, epoch: usize) -> f64 {
        if self.epochs <= 1 {
            return self.lr_init;
        }
        let frac = epoch as f64 / (self.epochs - 1) as f64;
        self.lr_init * (self.lr_final / self.lr_init).powf(frac)
    }
}
