//! Small fully connected network: logistic hidden layers, linear output.
//! Parameters live in one flat vector so optimizers can treat them
//! uniformly; layer `l` stores its weights row-major (`out x in`) followed
//! by its biases.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MlpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("a network needs at least an input and an output layer, with a single output")]
    BadShape,
}

pub const DEFAULT_SIZES: [usize; 4] = [15, 20, 20, 1];

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

impl Mlp {
    pub fn zeros(sizes: &[usize]) -> Result<Self, MlpError> {
        if sizes.len() < 2 || *sizes.last().unwrap() != 1 || sizes.contains(&0) {
            return Err(MlpError::BadShape);
        }
        Ok(Self { sizes: sizes.to_vec(), params: vec![0.0; param_count(sizes)] })
    }

    /// Uniform initialization in +/- 1/sqrt(fan_in).
    pub fn random(sizes: &[usize], seed: u64) -> Result<Self, MlpError> {
        let mut net = Self::zeros(sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut off = 0;
        for w in sizes.windows(2) {
            let bound = 1.0 / (w[0] as f64).sqrt();
            for p in &mut net.params[off..off + w[0] * w[1] + w[1]] {
                *p = rng.gen_range(-bound..bound);
            }
            off += w[0] * w[1] + w[1];
        }
        Ok(net)
    }

    pub fn from_params(sizes: &[usize], params: Vec<f64>) -> Result<Self, MlpError> {
        let net = Self::zeros(sizes)?;
        if params.len() != net.params.len() {
            return Err(MlpError::DimensionMismatch { expected: net.params.len(), got: params.len() });
        }
        Ok(Self { sizes: sizes.to_vec(), params })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn input_len(&self) -> usize {
        self.sizes[0]
    }

    pub(crate) fn workspace(&self) -> Workspace {
        Workspace {
            acts: self.sizes.iter().map(|n| vec![0.0; *n]).collect(),
            delta: Vec::with_capacity(self.sizes.iter().copied().max().unwrap_or(1)),
            next: Vec::with_capacity(self.sizes.iter().copied().max().unwrap_or(1)),
        }
    }

    /// Fills the activations of every layer, input first.
    fn propagate(&self, x: &[f64], ws: &mut Workspace) {
        ws.acts[0].copy_from_slice(x);
        let mut off = 0;
        let last = self.sizes.len() - 2;
        for l in 0..self.sizes.len() - 1 {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let weights = &self.params[off..off + n_in * n_out];
            let biases = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let (head, tail) = ws.acts.split_at_mut(l + 1);
            let prev = &head[l];
            for (j, out) in tail[0].iter_mut().enumerate() {
                let z = biases[j] + weights[j * n_in..(j + 1) * n_in].iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
                *out = if l == last { z } else { sigmoid(z) };
            }
            off += n_in * n_out + n_out;
        }
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64, MlpError> {
        self.check(x)?;
        Ok(self.forward_unchecked(x))
    }

    pub(crate) fn forward_unchecked(&self, x: &[f64]) -> f64 {
        let mut ws = self.workspace();
        self.forward_with(x, &mut ws)
    }

    pub(crate) fn forward_with(&self, x: &[f64], ws: &mut Workspace) -> f64 {
        self.propagate(x, ws);
        ws.acts.last().unwrap()[0]
    }

    fn check(&self, x: &[f64]) -> Result<(), MlpError> {
        if x.len() != self.sizes[0] {
            return Err(MlpError::DimensionMismatch { expected: self.sizes[0], got: x.len() });
        }
        Ok(())
    }

    /// Gradient of `0.5 (net(x) - target)^2` with respect to the flat
    /// parameter vector.
    pub fn gradient(&self, x: &[f64], target: f64) -> Result<Vec<f64>, MlpError> {
        self.check(x)?;
        let mut g = vec![0.0; self.params.len()];
        self.accumulate_gradient(x, target, &mut g, &mut self.workspace());
        Ok(g)
    }

    /// Adds the gradient for one sample into `g`; returns the squared-error
    /// contribution `0.5 (y - t)^2`.
    pub(crate) fn accumulate_gradient(&self, x: &[f64], target: f64, g: &mut [f64], ws: &mut Workspace) -> f64 {
        self.propagate(x, ws);
        let n_layers = self.sizes.len() - 1;
        let y = ws.acts[n_layers][0];
        ws.delta.clear();
        ws.delta.push(y - target);
        let mut off = self.params.len();
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            off -= n_in * n_out + n_out;
            let input = &ws.acts[l];
            for j in 0..n_out {
                let d = ws.delta[j];
                let row = &mut g[off + j * n_in..off + (j + 1) * n_in];
                for (gi, xi) in row.iter_mut().zip(input) {
                    *gi += d * xi;
                }
                g[off + n_in * n_out + j] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_in * n_out];
                ws.next.clear();
                ws.next.extend((0..n_in).map(|i| {
                    let s: f64 = (0..n_out).map(|j| weights[j * n_in + i] * ws.delta[j]).sum();
                    let a = input[i];
                    s * a * (1.0 - a)
                }));
                std::mem::swap(&mut ws.delta, &mut ws.next);
            }
        }
        0.5 * (y - target) * (y - target)
    }
}

/// Per-thread scratch buffers for forward and backward passes.
pub(crate) struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next: Vec<f64>,
}

fn half_squared_error(net: &Mlp, x: &[f64], t: f64) -> f64 {
    let y = net.forward(x).unwrap();
    0.5 * (y - t) * (y - t)
}

/// Central finite differences; returns the worst relative error.
pub fn finite_difference_error(net: &Mlp, x: &[f64], t: f64) -> f64 {
    let g = net.gradient(x, t).unwrap();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for i in 0..net.params().len() {
        let mut p = net.clone();
        p.params_mut()[i] += h;
        let up = half_squared_error(&p, x, t);
        p.params_mut()[i] -= 2.0 * h;
        let down = half_squared_error(&p, x, t);
        let fd = (up - down) / (2.0 * h);
        // Below 1e-3 the cancellation noise of the difference quotient (about
        // 1e-16 f / h) dominates, so tiny components are compared absolutely.
        let err = (fd - g[i]).abs() / fd.abs().max(g[i].abs()).max(1e-3);
        worst = worst.max(err);
    }
    worst
}
