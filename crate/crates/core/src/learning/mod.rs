//! Learners for the level-k pilots: tabular Monte-Carlo policy iteration for
//! the planar model and neural fitted Q iteration for the spatial one.

pub mod mlp;
pub mod nfq;
pub mod persistence;
pub mod tabular;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::PilotAction;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnParams {
    /// Policy learning rate of the tabular update.
    pub epsilon: f64,
    /// Blend between the old and the new Q target in NFQ.
    pub alpha: f64,
    pub gamma: f64,
    pub exploration_start: f64,
    pub exploration_end: f64,
    pub episodes_per_iteration: usize,
    pub max_iterations: usize,
    pub min_iterations: usize,
    pub window: usize,
    pub tolerance: f64,
    pub nfq_epochs: usize,
    pub experience_cap: usize,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            epsilon: 0.2,
            alpha: 1.0,
            gamma: 0.95,
            exploration_start: 0.3,
            exploration_end: 0.05,
            episodes_per_iteration: 300,
            max_iterations: 80,
            min_iterations: 20,
            window: 5,
            tolerance: 0.02,
            nfq_epochs: 300,
            experience_cap: 20_000,
        }
    }
}

impl LearnParams {
    /// Desk-scale budget per model: the planar defaults, and a reduced
    /// episode budget for the network learner that always runs its full
    /// iteration count before testing convergence.
    pub fn for_mode(mode: persistence::Mode) -> Self {
        match mode {
            persistence::Mode::Planar => Self::default(),
            persistence::Mode::Spatial => Self {
                episodes_per_iteration: 40,
                max_iterations: 40,
                min_iterations: 40,
                window: 10,
                tolerance: 0.10,
                experience_cap: 6000,
                ..Self::default()
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LearnParamsError {
    #[error("epsilon must lie in (0, 1], got {0}")]
    Epsilon(f64),
    #[error("gamma must lie in [0, 1), got {0}")]
    Gamma(f64),
    #[error("alpha must lie in (0, 1], got {0}")]
    Alpha(f64),
    #[error("exploration rates must lie in [0, 1]")]
    Exploration,
    #[error("episode, iteration and window counts must be positive")]
    Counts,
}

impl LearnParams {
    pub fn validate(&self) -> Result<(), LearnParamsError> {
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(LearnParamsError::Epsilon(self.epsilon));
        }
        if !(self.gamma >= 0.0 && self.gamma < 1.0) {
            return Err(LearnParamsError::Gamma(self.gamma));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(LearnParamsError::Alpha(self.alpha));
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.exploration_start) || !unit(self.exploration_end) {
            return Err(LearnParamsError::Exploration);
        }
        if self.episodes_per_iteration == 0 || self.max_iterations == 0 || self.window == 0 {
            return Err(LearnParamsError::Counts);
        }
        Ok(())
    }

    /// Exploration rate for iteration `it`, linear from start to end.
    pub fn exploration_at(&self, it: usize) -> f64 {
        if self.max_iterations <= 1 {
            return self.exploration_end;
        }
        let f = (it as f64 / (self.max_iterations - 1) as f64).min(1.0);
        self.exploration_start + f * (self.exploration_end - self.exploration_start)
    }
}

/// Seed for stream `counter` under `master` (splitmix64 finalizer over the
/// pair), so episode `e` of a batch always draws the same numbers no matter
/// which thread runs it.
pub fn derive_seed(master: u64, counter: u64) -> u64 {
    let mut z = master ^ counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Index of the largest value. Exact ties go to `preferred` when it is among
/// them, otherwise to the lowest index.
pub fn argmax_with_preference(values: &[f64], preferred: usize) -> usize {
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if values.get(preferred) == Some(&best) {
        return preferred;
    }
    values.iter().position(|v| *v == best).unwrap_or(0)
}

/// Greedy choice over `candidates` given their values; ties go to Straight,
/// then to the lowest action code.
pub fn greedy_action(values: &[f64], candidates: &[PilotAction]) -> PilotAction {
    assert_eq!(values.len(), candidates.len());
    let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let tied = candidates.iter().zip(values).filter(|(_, v)| **v == best).map(|(a, _)| *a);
    let mut pick: Option<PilotAction> = None;
    for a in tied {
        pick = Some(match pick {
            _ if a == PilotAction::Straight => return a,
            Some(p) if p.code() <= a.code() => p,
            _ => a,
        });
    }
    pick.unwrap_or(PilotAction::Straight)
}

/// With probability `rate` a uniformly drawn candidate, else the greedy one.
pub fn epsilon_greedy<R: Rng>(values: &[f64], candidates: &[PilotAction], rate: f64, rng: &mut R) -> PilotAction {
    if rng.gen::<f64>() < rate {
        candidates[rng.gen_range(0..candidates.len())]
    } else {
        greedy_action(values, candidates)
    }
}

/// Declares convergence once the moving averages of the last two windows
/// differ by less than `tolerance` (relative to their magnitude, floored at
/// one).
#[derive(Debug, Clone)]
pub struct ConvergenceMonitor {
    window: usize,
    tolerance: f64,
    min_len: usize,
    history: Vec<f64>,
}

impl ConvergenceMonitor {
    pub fn new(window: usize, tolerance: f64, min_len: usize) -> Self {
        Self { window: window.max(1), tolerance, min_len, history: Vec::new() }
    }

    pub fn push(&mut self, value: f64) -> bool {
        self.history.push(value);
        let n = self.history.len();
        if n < self.min_len.max(2 * self.window) {
            return false;
        }
        let w = self.window as f64;
        let recent: f64 = self.history[n - self.window..].iter().sum::<f64>() / w;
        let before: f64 = self.history[n - 2 * self.window..n - self.window].iter().sum::<f64>() / w;
        (recent - before).abs() < self.tolerance * recent.abs().max(before.abs()).max(1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn all_equal_values_pick_straight() {
        assert_eq!(greedy_action(&[0.0; 5], &PilotAction::ALL), PilotAction::Straight);
        let no_straight = [PilotAction::PitchDown10, PilotAction::TurnRight45, PilotAction::PitchUp10];
        assert_eq!(greedy_action(&[1.0; 3], &no_straight), PilotAction::TurnRight45);
    }

    #[test]
    fn dominant_action_is_always_chosen_greedily() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let a = epsilon_greedy(&[0.0, 0.0, 0.0, 3.0, 0.0], &PilotAction::ALL, 0.0, &mut rng);
            assert_eq!(a, PilotAction::PitchUp10);
        }
    }

    #[test]
    fn full_exploration_is_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut counts = [0usize; 5];
        for _ in 0..n {
            counts[epsilon_greedy(&[9.0, 0.0, 0.0, 0.0, 0.0], &PilotAction::ALL, 1.0, &mut rng).code() as usize] += 1;
        }
        let e = n as f64 / 5.0;
        let chi2: f64 = counts.iter().map(|c| (*c as f64 - e).powi(2) / e).sum();
        // 99.9% quantile of chi-square with 4 degrees of freedom.
        assert!(chi2 < 18.467, "{counts:?} chi2 {chi2}");
    }

    #[test]
    fn seeds_are_distinct_streams() {
        let seeds: std::collections::HashSet<u64> = (0..10_000).map(|c| derive_seed(42, c)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn params_validation() {
        assert!(LearnParams::default().validate().is_ok());
        assert!(LearnParams { gamma: 1.0, ..Default::default() }.validate().is_err());
        assert!(LearnParams { epsilon: 0.0, ..Default::default() }.validate().is_err());
        let p = LearnParams { max_iterations: 11, ..Default::default() };
        assert_eq!(p.exploration_at(0), 0.3);
        assert!((p.exploration_at(10) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn monitor_needs_two_windows() {
        let mut m = ConvergenceMonitor::new(3, 0.01, 0);
        let flags: Vec<bool> = [1.0; 6].iter().map(|v| m.push(*v)).collect();
        assert_eq!(flags, [false, false, false, false, false, true]);
    }
}
