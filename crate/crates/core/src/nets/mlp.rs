use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{DiffScalarField, Var};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    #[default]
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation value `y`.
    fn slope(self, y: f64) -> f64 {
        match self {
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Tanh => 1.0 - y * y,
        }
    }

    fn apply_var(self, x: Var<'_>) -> Var<'_> {
        match self {
            Activation::Sigmoid => x.sigmoid(),
            Activation::Tanh => x.tanh(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpArchitecture {
    pub input: usize,
    pub hidden: Vec<usize>,
    pub output: usize,
    #[serde(default)]
    pub activation: Activation,
}

impl MlpArchitecture {
    pub fn new(input: usize, hidden: Vec<usize>, output: usize) -> Self {
        MlpArchitecture { input, hidden, output, activation: Activation::Sigmoid }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input == 0 || self.output == 0 || self.hidden.contains(&0) {
            return Err(Error::Invalid(format!("layer widths must be positive: {self:?}")));
        }
        Ok(())
    }

    /// `(fan_in, fan_out)` per affine layer.
    pub fn layers(&self) -> Vec<(usize, usize)> {
        let mut dims = vec![self.input];
        dims.extend(&self.hidden);
        dims.push(self.output);
        dims.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

pub fn param_count(arch: &MlpArchitecture) -> usize {
    arch.layers().iter().map(|(i, o)| (i + 1) * o).sum()
}

/// Uniform Glorot initialisation; biases start at zero.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(param_count(arch));
    for (fan_in, fan_out) in arch.layers() {
        let r = (6.0 / (fan_in + fan_out) as f64).sqrt();
        out.extend((0..fan_in * fan_out).map(|_| rng.random_range(-r..=r)));
        out.extend(std::iter::repeat_n(0.0, fan_out));
    }
    out
}

/// A feedforward network: affine → activation per hidden layer, affine output.
///
/// Parameters are stored per layer as the row-major `fan_out × fan_in`
/// weight matrix followed by the bias.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    arch: MlpArchitecture,
    params: Vec<f64>,
}

impl MlpModel {
    pub fn new(arch: MlpArchitecture, params: Vec<f64>) -> Result<Self> {
        arch.validate()?;
        let expected = param_count(&arch);
        if params.len() != expected {
            return Err(Error::ArityMismatch { expected, got: params.len() });
        }
        Ok(MlpModel { arch, params })
    }

    pub fn random(arch: MlpArchitecture, seed: u64) -> Result<Self> {
        let p = init_params(&arch, seed);
        Self::new(arch, p)
    }

    pub fn arch(&self) -> &MlpArchitecture {
        &self.arch
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn set_params(&mut self, p: &[f64]) -> Result<()> {
        if p.len() != self.params.len() {
            return Err(Error::ArityMismatch { expected: self.params.len(), got: p.len() });
        }
        self.params.copy_from_slice(p);
        Ok(())
    }

    /// Hidden activations per layer (input first), used by forward and backprop.
    fn activations(&self, x: &[f64]) -> Vec<Vec<f64>> {
        let layers = self.arch.layers();
        let mut acts = vec![x.to_vec()];
        let mut off = 0;
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let w = &self.params[off..off + fan_in * fan_out];
            let b = &self.params[off + fan_in * fan_out..off + (fan_in + 1) * fan_out];
            off += (fan_in + 1) * fan_out;
            let a = acts.last().unwrap();
            let mut z: Vec<f64> = (0..fan_out)
                .map(|o| b[o] + w[o * fan_in..(o + 1) * fan_in].iter().zip(a).map(|(w, a)| w * a).sum::<f64>())
                .collect();
            if l + 1 < layers.len() {
                z.iter_mut().for_each(|v| *v = self.arch.activation.apply(*v));
            }
            acts.push(z);
        }
        acts
    }

    /// Value and input gradient of a scalar-output network without a tape.
    pub fn value_and_input_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        if self.arch.output != 1 {
            return Err(Error::Invalid("input gradient needs a scalar network".into()));
        }
        if x.len() != self.arch.input {
            return Err(Error::ArityMismatch { expected: self.arch.input, got: x.len() });
        }
        let layers = self.arch.layers();
        let acts = self.activations(x);
        let mut offsets = Vec::with_capacity(layers.len());
        let mut off = 0;
        for &(i, o) in &layers {
            offsets.push(off);
            off += (i + 1) * o;
        }
        let mut delta = vec![1.0];
        for l in (0..layers.len()).rev() {
            let (fan_in, fan_out) = layers[l];
            let w = &self.params[offsets[l]..offsets[l] + fan_in * fan_out];
            let mut prev = vec![0.0; fan_in];
            for o in 0..fan_out {
                for (i, p) in prev.iter_mut().enumerate() {
                    *p += delta[o] * w[o * fan_in + i];
                }
            }
            if l > 0 {
                for (p, a) in prev.iter_mut().zip(&acts[l]) {
                    *p *= self.arch.activation.slope(*a);
                }
            }
            delta = prev;
        }
        Ok((acts.last().unwrap()[0], delta))
    }

    /// Batched evaluation on a tape: `x` is `N × input`, `params` a `1 × P` row.
    pub fn eval_tape<'t>(&self, params: Var<'t>, x: Var<'t>) -> Var<'t> {
        let layers = self.arch.layers();
        let n = x.shape().0;
        let mut a = x;
        let mut off = 0;
        for (l, &(fan_in, fan_out)) in layers.iter().enumerate() {
            let w = params.segment(off, fan_out, fan_in);
            let b = params.segment(off + fan_in * fan_out, 1, fan_out);
            off += (fan_in + 1) * fan_out;
            let z = a.matmul(w.t()) + b.broadcast_rows(n);
            a = if l + 1 < layers.len() { self.arch.activation.apply_var(z) } else { z };
        }
        a
    }
}

pub fn mlp_forward(m: &MlpModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != m.arch.input {
        return Err(Error::ArityMismatch { expected: m.arch.input, got: x.len() });
    }
    Ok(m.activations(x).pop().unwrap())
}

impl DiffScalarField for MlpModel {
    fn input_dim(&self) -> usize {
        self.arch.input
    }

    fn params(&self) -> &[f64] {
        &self.params
    }

    fn eval<'t>(&self, params: Var<'t>, x: Var<'t>) -> Var<'t> {
        self.eval_tape(params, x)
    }

    fn set_params(&mut self, p: &[f64]) -> Result<()> {
        MlpModel::set_params(self, p)
    }

    fn value_and_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.value_and_input_grad(x)
    }
}
