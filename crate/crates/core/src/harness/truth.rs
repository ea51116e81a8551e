//! Ground-truth expected gain of a query under the simulated crowd.
//!
//! The gain of `q(k, E)` at a node is the number of returned entities not
//! yet in the ledger. Its expectation is computed exactly by enumerating
//! draw sequences when the eligible pool is small, and by Monte Carlo
//! otherwise.

use crate::domain::{Domain, EntityId, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;

/// Pools up to this size (with `k` up to [`EXACT_MAX_K`]) are enumerated.
pub const EXACT_MAX_POOL: usize = 12;
pub const EXACT_MAX_K: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrueGain {
    pub mean: f64,
    /// Zero for exact results.
    pub stderr: f64,
    pub exact: bool,
}

/// `(popularity, is new)` for every entity a query at `node` excluding `exclude` can return.
pub fn eligible_pool(
    domain: &Domain,
    node: &NodeId,
    exclude: &BTreeSet<EntityId>,
    ledger: &BTreeSet<EntityId>,
) -> Vec<(f64, bool)> {
    domain
        .population(node)
        .members
        .iter()
        .filter(|id| !exclude.contains(id))
        .map(|&id| (domain.catalog.get(id).popularity, !ledger.contains(&id)))
        .collect()
}

/// Expected gain of `q(k, exclude)` at `node`: exact for small pools, otherwise `draws` Monte Carlo responses.
pub fn true_gain(
    domain: &Domain,
    node: &NodeId,
    k: u32,
    exclude: &BTreeSet<EntityId>,
    ledger: &BTreeSet<EntityId>,
    draws: usize,
    seed: u64,
) -> TrueGain {
    let pool = eligible_pool(domain, node, exclude, ledger);
    if k as usize >= pool.len() {
        // The whole pool comes back.
        return TrueGain { mean: pool.iter().filter(|p| p.1).count() as f64, stderr: 0.0, exact: true };
    }
    if pool.len() <= EXACT_MAX_POOL && k <= EXACT_MAX_K {
        return TrueGain { mean: exact_gain(&pool, k), stderr: 0.0, exact: true };
    }
    monte_carlo_gain(&pool, k, draws, seed)
}

/// Sums, over every ordered sequence of `min(k, |pool|)` sequential weighted draws, probability times new count.
pub fn exact_gain(pool: &[(f64, bool)], k: u32) -> f64 {
    fn walk(pool: &[(f64, bool)], used: &mut [bool], left: u32, mass: f64, prob: f64, new: u32, acc: &mut f64) {
        if left == 0 || mass <= 0.0 {
            *acc += prob * new as f64;
            return;
        }
        for i in 0..pool.len() {
            if used[i] {
                continue;
            }
            let (p, fresh) = pool[i];
            used[i] = true;
            walk(pool, used, left - 1, mass - p, prob * p / mass, new + fresh as u32, acc);
            used[i] = false;
        }
    }
    let take = (k as usize).min(pool.len()) as u32;
    let mass: f64 = pool.iter().map(|p| p.0).sum();
    let mut acc = 0.0;
    walk(pool, &mut vec![false; pool.len()], take, mass, 1.0, 0, &mut acc);
    acc
}

/// Mean and standard error of the new count over `draws` simulated responses.
///
/// A response is drawn with replacement by inverse CDF and duplicates are
/// discarded until `k` distinct entities are held, which has the same law
/// as sequential weighted sampling without replacement.
pub fn monte_carlo_gain(pool: &[(f64, bool)], k: u32, draws: usize, seed: u64) -> TrueGain {
    let take = (k as usize).min(pool.len());
    let mut cdf = Vec::with_capacity(pool.len());
    let mut acc = 0.0;
    for p in pool {
        acc += p.0;
        cdf.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = vec![false; pool.len()];
    let mut chosen = Vec::with_capacity(take);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..draws.max(1) {
        chosen.clear();
        while chosen.len() < take {
            let u = rng.gen::<f64>() * acc;
            let i = cdf.partition_point(|&c| c <= u).min(pool.len() - 1);
            if !picked[i] {
                picked[i] = true;
                chosen.push(i);
            }
        }
        let new = chosen.iter().filter(|&&i| pool[i].1).count() as f64;
        for &i in &chosen {
            picked[i] = false;
        }
        sum += new;
        sum_sq += new * new;
    }
    let n = draws.max(1) as f64;
    let mean = sum / n;
    let var = if n > 1.0 { ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0) } else { 0.0 };
    TrueGain { mean, stderr: (var / n).sqrt(), exact: false }
}
