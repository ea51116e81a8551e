//! Non-adaptive baselines: random nodes, random leaves, breadth-first.

use super::engine::Runner;
use super::{derive_seed, PolicyError, PolicySettings, Run};
use crate::domain::{Domain, NodeId};
use crate::estimators::draw_exclude_list;
use crate::oracle::CrowdOracle;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{HashSet, VecDeque};

const RANDOM_STREAM: u64 = 0x4a4d;
const BFS_STREAM: u64 = 0xbf5;

/// Draws before a random policy gives up on finding an affordable query.
pub const MAX_REDRAWS: usize = 10_000;

/// Rand draws every coordinate uniformly from all of the attribute's values;
/// RandL only from its leaves.
pub(super) fn run_random<'d>(
    domain: &'d Domain,
    oracle: &mut CrowdOracle<'d>,
    budget: f64,
    seed: u64,
    settings: &PolicySettings,
    leaves_only: bool,
) -> Result<Run, PolicyError> {
    let mut runner = Runner::new(domain, oracle, budget, seed, settings);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, RANDOM_STREAM, leaves_only as u64]));
    let choices: Vec<Vec<u32>> = domain
        .poset
        .hierarchies()
        .iter()
        .map(|h| if leaves_only { h.leaves().collect() } else { (0..h.len() as u32).collect() })
        .collect();
    let cheapest = runner.cheapest();
    while runner.affordable(cheapest) {
        let mut picked = None;
        for _ in 0..MAX_REDRAWS {
            let node = NodeId::new(choices.iter().map(|c| c[rng.gen_range(0..c.len())]).collect());
            let config = *settings.configs.choose(&mut rng).expect("validated nonempty");
            if runner.affordable(runner.cost_of(&node, config)) {
                picked = Some((node, config));
                break;
            }
        }
        let Some((node, config)) = picked else {
            break;
        };
        let exclude = draw_exclude_list(&runner.store, &node, config.l, &mut rng);
        runner.execute(&node, config, exclude)?;
    }
    Ok(runner.finish())
}

/// One randomly configured query per node, visiting the poset breadth-first
/// with siblings in lexicographic order. Nodes with no affordable
/// configuration are skipped.
pub(super) fn run_bfs<'d>(
    domain: &'d Domain,
    oracle: &mut CrowdOracle<'d>,
    budget: f64,
    seed: u64,
    settings: &PolicySettings,
) -> Result<Run, PolicyError> {
    let mut runner = Runner::new(domain, oracle, budget, seed, settings);
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[seed, BFS_STREAM]));
    let root = domain.poset.root().clone();
    let mut queue = VecDeque::from([root.clone()]);
    let mut seen: HashSet<NodeId> = HashSet::from([root]);
    let cheapest = runner.cheapest();
    while let Some(node) = queue.pop_front() {
        if !runner.affordable(cheapest) {
            break;
        }
        let options: Vec<_> =
            settings.configs.iter().copied().filter(|&c| runner.affordable(runner.cost_of(&node, c))).collect();
        if let Some(&config) = options.choose(&mut rng) {
            let exclude = draw_exclude_list(&runner.store, &node, config.l, &mut rng);
            runner.execute(&node, config, exclude)?;
        }
        let mut children = domain.poset.direct_descendants(&node)?;
        children.sort();
        for child in children {
            if seen.insert(child.clone()) {
                queue.push_back(child);
            }
        }
    }
    Ok(runner.finish())
}
