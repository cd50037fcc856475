//! Monte-Carlo policy iteration over discrete messages.
//!
//! Each iteration evaluates the current stochastic policy by every-visit
//! incremental Monte Carlo, then moves every visited row a step `epsilon`
//! toward the point mass on the action with the largest advantage
//! `Q(m, a) - V(m)`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, ConvergenceMonitor, LearnParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_messages: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn uniform(n_messages: usize, n_actions: usize) -> Self {
        assert!(n_messages > 0 && n_actions > 0);
        Self { n_messages, n_actions, probs: vec![1.0 / n_actions as f64; n_messages * n_actions] }
    }

    pub fn from_probs(n_messages: usize, n_actions: usize, probs: Vec<f64>) -> Option<Self> {
        (n_messages > 0 && n_actions > 0 && probs.len() == n_messages * n_actions)
            .then_some(Self { n_messages, n_actions, probs })
    }

    pub fn n_messages(&self) -> usize {
        self.n_messages
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.probs[m * self.n_actions..(m + 1) * self.n_actions]
    }

    fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.probs[m * self.n_actions..(m + 1) * self.n_actions]
    }

    pub fn sample(&self, m: usize, rng: &mut ChaCha8Rng) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let row = self.row(m);
        for (a, p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                return a;
            }
        }
        // Rounding left the cumulative sum just below u: take the last
        // action with positive mass.
        row.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }

    /// Most probable action; ties prefer `preferred`, then the lowest code.
    pub fn greedy(&self, m: usize, preferred: usize) -> usize {
        super::argmax_with_preference(self.row(m), preferred)
    }

    /// Largest deviation of any row sum from 1, and whether all entries are
    /// nonnegative.
    pub fn stochasticity_error(&self) -> (f64, bool) {
        let mut worst = 0.0f64;
        let mut nonneg = true;
        for m in 0..self.n_messages {
            let r = self.row(m);
            worst = worst.max((r.iter().sum::<f64>() - 1.0).abs());
            nonneg &= r.iter().all(|p| *p >= 0.0);
        }
        (worst, nonneg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueTables {
    pub n_actions: usize,
    pub v: Vec<f64>,
    pub q: Vec<f64>,
    pub n_m: Vec<u32>,
    pub n_ma: Vec<u32>,
}

impl ValueTables {
    pub fn new(n_messages: usize, n_actions: usize) -> Self {
        Self {
            n_actions,
            v: vec![0.0; n_messages],
            q: vec![0.0; n_messages * n_actions],
            n_m: vec![0; n_messages],
            n_ma: vec![0; n_messages * n_actions],
        }
    }

    pub fn q_row(&self, m: usize) -> &[f64] {
        &self.q[m * self.n_actions..(m + 1) * self.n_actions]
    }

    /// Incorporates one episode: every visit updates the running averages
    /// of the discounted return that follows it.
    pub fn absorb(&mut self, episode: &[Step], gamma: f64) {
        let mut g = 0.0;
        for s in episode.iter().rev() {
            g = s.reward + gamma * g;
            let m = s.message as usize;
            let ma = m * self.n_actions + s.action as usize;
            self.n_m[m] += 1;
            self.v[m] += (g - self.v[m]) / self.n_m[m] as f64;
            self.n_ma[ma] += 1;
            self.q[ma] += (g - self.q[ma]) / self.n_ma[ma] as f64;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Step {
    pub message: u32,
    pub action: u8,
    pub reward: f64,
}

/// Produces one episode under `policy`; all randomness must come from
/// `seed`.
pub trait EpisodeSource: Sync {
    fn rollout(&self, policy: &TabularPolicy, seed: u64) -> Vec<Step>;
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub tables: ValueTables,
    /// Mean undiscounted episode return.
    pub mean_return: f64,
}

/// Evaluates `policy` over `episodes` rollouts. Rollouts run in parallel;
/// tables are merged in episode order.
pub fn mc_evaluate<E: EpisodeSource + ?Sized>(
    policy: &TabularPolicy,
    env: &E,
    episodes: usize,
    seed: u64,
    gamma: f64,
) -> Evaluation {
    let rollouts = crate::par::map_range(episodes, |e| env.rollout(policy, derive_seed(seed, e as u64)));
    let mut tables = ValueTables::new(policy.n_messages, policy.n_actions);
    let mut total = 0.0;
    for ep in &rollouts {
        tables.absorb(ep, gamma);
        total += ep.iter().map(|s| s.reward).sum::<f64>();
    }
    Evaluation { tables, mean_return: if episodes > 0 { total / episodes as f64 } else { 0.0 } }
}

/// One policy-improvement step. Unvisited actions count as advantage 0;
/// rows whose advantages are all equal carry no signal and are left alone.
pub fn policy_improve(policy: &mut TabularPolicy, tables: &ValueTables, epsilon: f64) {
    let na = policy.n_actions;
    let mut adv = vec![0.0; na];
    for m in 0..policy.n_messages {
        if tables.n_m[m] == 0 {
            continue;
        }
        for a in 0..na {
            adv[a] = if tables.n_ma[m * na + a] > 0 { tables.q[m * na + a] - tables.v[m] } else { 0.0 };
        }
        if adv.iter().all(|x| *x == adv[0]) {
            continue;
        }
        let best = super::argmax_with_preference(&adv, usize::MAX);
        let row = policy.row_mut(m);
        for (a, p) in row.iter_mut().enumerate() {
            *p = (1.0 - epsilon) * *p + if a == best { epsilon } else { 0.0 };
        }
    }
}

#[derive(Debug, Clone)]
pub struct TabularOutcome {
    pub policy: TabularPolicy,
    pub converged: bool,
    pub iterations: usize,
    /// Mean episode return per iteration.
    pub curve: Vec<f64>,
}

pub fn train_tabular<E: EpisodeSource + ?Sized>(
    env: &E,
    n_messages: usize,
    n_actions: usize,
    params: &LearnParams,
    seed: u64,
) -> TabularOutcome {
    let mut policy = TabularPolicy::uniform(n_messages, n_actions);
    let mut monitor = ConvergenceMonitor::new(params.window, params.tolerance, params.min_iterations);
    let mut curve = Vec::new();
    for it in 0..params.max_iterations {
        let ev = mc_evaluate(&policy, env, params.episodes_per_iteration, derive_seed(seed, 1 << 32 | it as u64), params.gamma);
        curve.push(ev.mean_return);
        policy_improve(&mut policy, &ev.tables, params.epsilon);
        if monitor.push(ev.mean_return) {
            return TabularOutcome { policy, converged: true, iterations: it + 1, curve };
        }
    }
    TabularOutcome { policy, converged: false, iterations: params.max_iterations, curve }
}
