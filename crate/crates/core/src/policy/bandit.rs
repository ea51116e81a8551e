//! Optimism bonus and bad-action elimination.

use crate::scalar::Real;

/// Variance floor applied before the bonus is computed.
pub const VARIANCE_FLOOR: f64 = 0.01;

/// `sqrt(max(v, 0.01) * ln(t + 1) / max(trials, 1))`.
pub fn sigma<T: Real>(variance: T, node_trials: u32, t: u64) -> T {
    let v = variance.max(T::lit(VARIANCE_FLOOR));
    let trials = T::count(node_trials.max(1) as u64);
    (v * T::count(t + 1).ln() / trials).sqrt()
}

/// Confidence band of one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band<T> {
    pub mean: T,
    pub sigma: T,
}

impl<T: Real> Band<T> {
    pub fn upper(&self) -> T {
        self.mean + self.sigma
    }

    pub fn lower(&self) -> T {
        self.mean - self.sigma
    }
}

/// Flags candidates whose upper bound falls strictly below the best lower bound.
pub fn bad_actions<T: Real>(bands: &[Band<T>]) -> Vec<bool> {
    let best_lower = bands.iter().map(Band::lower).fold(T::neg_infinity(), T::max);
    bands.iter().map(|b| b.upper() < best_lower).collect()
}
