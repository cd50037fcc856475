//! Neural fitted Q iteration: each iteration rebuilds the Bellman targets
//! for the whole experience set and refits the network on them in batch
//! with iRprop-.

use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::{derive_seed, ConvergenceMonitor, LearnParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    /// Network input for the observed state and the action taken.
    pub input: Vec<f64>,
    pub reward: f64,
    /// Network inputs for the successor observation paired with every
    /// candidate action.
    pub next_inputs: Vec<Vec<f64>>,
    pub terminal: bool,
}

/// Targets `r + gamma max_a' Q(s', a')` (just `r` when terminal), blended
/// with the current estimate by `alpha`.
pub fn nfq_targets(net: &Mlp, data: &[Transition], gamma: f64, alpha: f64) -> Vec<f64> {
    crate::par::map_slice(data, |t| {
        let mut target = t.reward;
        if !t.terminal && gamma != 0.0 && !t.next_inputs.is_empty() {
            let best = t.next_inputs.iter().map(|x| net.forward_unchecked(x)).fold(f64::NEG_INFINITY, f64::max);
            target += gamma * best;
        }
        if alpha == 1.0 {
            target
        } else {
            (1.0 - alpha) * net.forward_unchecked(&t.input) + alpha * target
        }
    })
}

const STEP_INIT: f64 = 0.1;
const STEP_MIN: f64 = 1e-6;
const STEP_MAX: f64 = 50.0;
const GROW: f64 = 1.2;
const SHRINK: f64 = 0.5;
const PLATEAU_EPOCHS: usize = 10;
const PLATEAU_EPS: f64 = 1e-10;
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport {
    /// Batch error `sum 0.5 (Q - target)^2` of the best weights so far,
    /// recorded before the first update and after every epoch.
    pub errors: Vec<f64>,
    pub epochs: usize,
    pub plateaued: bool,
}

/// Batch error and gradient over all samples. Chunks are evaluated in
/// parallel and summed in chunk order, so the result does not depend on the
/// thread count.
fn batch_gradient(net: &Mlp, inputs: &[&[f64]], targets: &[f64]) -> (f64, Vec<f64>) {
    let n_chunks = inputs.len().div_ceil(CHUNK);
    let parts = crate::par::map_range(n_chunks, |c| {
        let lo = c * CHUNK;
        let hi = (lo + CHUNK).min(inputs.len());
        let mut g = vec![0.0; net.params().len()];
        let mut ws = net.workspace();
        let mut err = 0.0;
        for i in lo..hi {
            err += net.accumulate_gradient(inputs[i], targets[i], &mut g, &mut ws);
        }
        (err, g)
    });
    let mut total = vec![0.0; net.params().len()];
    let mut err = 0.0;
    for (e, g) in parts {
        err += e;
        for (t, v) in total.iter_mut().zip(g) {
            *t += v;
        }
    }
    (err, total)
}

/// Full-batch iRprop- on fixed (input, target) pairs; keeps the best
/// weights seen.
pub fn rprop_fit(net: &Mlp, inputs: &[&[f64]], targets: &[f64], epochs: usize) -> (Mlp, FitReport) {
    assert_eq!(inputs.len(), targets.len());
    let mut cur = net.clone();
    let n = cur.params().len();
    let mut steps = vec![STEP_INIT; n];
    let mut prev_grad = vec![0.0; n];
    let (mut err, mut grad) = batch_gradient(&cur, inputs, targets);
    let mut best = (err, cur.clone());
    let mut errors = vec![err];
    let mut stale = 0;
    let mut plateaued = false;
    let mut done = 0;
    for _ in 0..epochs {
        for i in 0..n {
            let s = prev_grad[i] * grad[i];
            if s > 0.0 {
                steps[i] = (steps[i] * GROW).min(STEP_MAX);
            } else if s < 0.0 {
                steps[i] = (steps[i] * SHRINK).max(STEP_MIN);
                grad[i] = 0.0;
            }
            cur.params_mut()[i] -= grad[i].signum() * steps[i] * (grad[i] != 0.0) as u8 as f64;
        }
        prev_grad = grad;
        (err, grad) = batch_gradient(&cur, inputs, targets);
        done += 1;
        if err < best.0 - PLATEAU_EPS {
            stale = 0;
        } else {
            stale += 1;
        }
        if err < best.0 {
            best = (err, cur.clone());
        }
        errors.push(best.0);
        if stale >= PLATEAU_EPOCHS {
            plateaued = true;
            break;
        }
    }
    (best.1, FitReport { errors, epochs: done, plateaued })
}

/// One NFQ refit: targets from `net`, then batch training warm-started
/// from `net`.
pub fn nfq_fit(net: &Mlp, data: &[Transition], params: &LearnParams) -> (Mlp, FitReport) {
    assert!(!data.is_empty(), "NFQ needs at least one transition");
    let targets = nfq_targets(net, data, params.gamma, params.alpha);
    let inputs: Vec<&[f64]> = data.iter().map(|t| t.input.as_slice()).collect();
    rprop_fit(net, &inputs, &targets, params.nfq_epochs)
}

/// Produces one episode of transitions while acting epsilon-greedily on
/// `net`, and the episode's total reward. All randomness must come from
/// `seed`.
pub trait NfqEnvironment: Sync {
    fn rollout(&self, net: &Mlp, exploration: f64, seed: u64) -> (Vec<Transition>, f64);
}

#[derive(Debug, Clone)]
pub struct NfqOutcome {
    /// The network whose rollouts scored the highest mean return.
    pub net: Mlp,
    pub converged: bool,
    pub iterations: usize,
    /// Mean episode return per iteration.
    pub curve: Vec<f64>,
}

pub fn train_nfq<E: NfqEnvironment + ?Sized>(env: &E, initial: Mlp, params: &LearnParams, seed: u64) -> NfqOutcome {
    let mut net = initial;
    let mut experience: Vec<Transition> = Vec::new();
    let mut monitor = ConvergenceMonitor::new(params.window, params.tolerance, params.min_iterations);
    let mut curve = Vec::new();
    let mut best: Option<(f64, Mlp)> = None;
    for it in 0..params.max_iterations {
        let exploration = params.exploration_at(it);
        let base = derive_seed(seed, 1 << 32 | it as u64);
        let episodes = crate::par::map_range(params.episodes_per_iteration, |e| env.rollout(&net, exploration, derive_seed(base, e as u64)));
        let mut total = 0.0;
        for (tr, ret) in episodes {
            total += ret;
            experience.extend(tr);
        }
        if experience.len() > params.experience_cap {
            experience.drain(..experience.len() - params.experience_cap);
        }
        let mean = total / params.episodes_per_iteration as f64;
        curve.push(mean);
        if best.as_ref().is_none_or(|(b, _)| mean > *b) {
            best = Some((mean, net.clone()));
        }
        if !experience.is_empty() {
            net = nfq_fit(&net, &experience, params).0;
        }
        if monitor.push(mean) {
            return NfqOutcome { net: best.map_or(net, |b| b.1), converged: true, iterations: it + 1, curve };
        }
    }
    NfqOutcome { net: best.map_or(net, |b| b.1), converged: false, iterations: params.max_iterations, curve }
}
