//! The round loop shared by every policy, plus the adaptive policies.

use super::bandit::{bad_actions, sigma, Band};
use super::cost::{Action, QueryConfig};
use super::transcript::{Transcript, TranscriptRow};
use super::{derive_seed, Elimination, PolicyError, PolicySettings, Pruned, Run};
use crate::domain::{Domain, EntityId, NodeId};
use crate::estimators::{draw_exclude_list, estimate_group, k_observation, GainEstimate, GainMethod, KModel};
use crate::oracle::{CrowdOracle, Query};
use crate::sample::SampleStore;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet, HashMap};

const ESTIMATE_STREAM: u64 = 0xe57;
const EXACT_STREAM: u64 = 0xe4ac;

/// Budget, crowd, store and transcript of one run.
pub(super) struct Runner<'a, 'd> {
    pub domain: &'d Domain,
    pub oracle: &'a mut CrowdOracle<'d>,
    pub settings: &'a PolicySettings,
    pub budget: f64,
    pub seed: u64,
    pub store: SampleStore,
    rows: Vec<TranscriptRow>,
    pruned: Vec<Pruned>,
}

impl<'a, 'd> Runner<'a, 'd> {
    pub fn new(
        domain: &'d Domain,
        oracle: &'a mut CrowdOracle<'d>,
        budget: f64,
        seed: u64,
        settings: &'a PolicySettings,
    ) -> Self {
        Self { domain, oracle, settings, budget, seed, store: SampleStore::new(), rows: Vec::new(), pruned: Vec::new() }
    }

    /// Round counter of the next query (1-based).
    pub fn t(&self) -> u64 {
        self.rows.len() as u64 + 1
    }

    pub fn cost_of(&self, node: &NodeId, config: QueryConfig) -> f64 {
        self.settings.cost.cost(config, self.domain.poset.specificity(node))
    }

    pub fn affordable(&self, cost: f64) -> bool {
        self.store.ledger().cost_spent() + cost <= self.budget
    }

    /// Cheapest query anywhere in the poset.
    pub fn cheapest(&self) -> f64 {
        let root = self.domain.poset.root();
        self.settings.configs.iter().map(|&c| self.cost_of(root, c)).fold(f64::INFINITY, f64::min)
    }

    pub fn is_dead(&self, node: &NodeId) -> bool {
        self.store.is_dead(self.domain, node)
    }

    /// Issues the query, merges the answer and debits its cost.
    pub fn execute(
        &mut self,
        node: &NodeId,
        config: QueryConfig,
        exclude: BTreeSet<EntityId>,
    ) -> Result<u32, PolicyError> {
        let cost = self.cost_of(node, config);
        assert!(self.affordable(cost), "policy selected an unaffordable query");
        let query = Query { node: node.clone(), k: config.k, exclude };
        let response = self.oracle.respond(&query)?;
        let gain = self.store.ingest(self.domain, node, &response);
        self.store.ledger_mut().debit(cost);
        let ledger = self.store.ledger();
        self.rows.push(TranscriptRow {
            round: self.rows.len() as u64 + 1,
            node: node.clone(),
            config,
            exclude: query.exclude.into_iter().collect(),
            returned: response.entities,
            gain,
            cost,
            cumulative_unique: ledger.len() as u64,
            cumulative_cost: ledger.cost_spent(),
        });
        Ok(gain)
    }

    pub fn finish(self) -> Run {
        Run { transcript: Transcript { rows: self.rows }, store: self.store, pruned: self.pruned }
    }

    fn root_actions(&self) -> BTreeSet<Action> {
        self.actions_at(self.domain.poset.root())
    }

    fn actions_at(&self, node: &NodeId) -> BTreeSet<Action> {
        self.settings.configs.iter().map(|&config| Action { node: node.clone(), config }).collect()
    }

    /// Adds every configuration at the live direct descendants of `node`.
    fn expand(&self, actions: &mut BTreeSet<Action>, node: &NodeId) -> Result<(), PolicyError> {
        for child in self.domain.poset.direct_descendants(node)? {
            if !self.is_dead(&child) {
                actions.extend(self.actions_at(&child));
            }
        }
        Ok(())
    }

    /// Drops actions at dead nodes.
    fn retain_live(&self, actions: &mut BTreeSet<Action>) {
        let dead: BTreeSet<NodeId> = actions.iter().map(|a| &a.node).filter(|n| self.is_dead(n)).cloned().collect();
        actions.retain(|a| !dead.contains(&a.node));
    }

    fn affordable_action(&self, a: &Action) -> bool {
        self.affordable(self.cost_of(&a.node, a.config))
    }
}

/// Candidate ordering: higher score, then lower cost, then shallower node;
/// remaining ties keep the lexicographically first action.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateScore {
    pub score: f64,
    pub cost: f64,
    pub level: u32,
}

impl CandidateScore {
    fn beats(&self, other: &CandidateScore) -> bool {
        if self.score != other.score {
            return self.score > other.score;
        }
        if self.cost != other.cost {
            return self.cost < other.cost;
        }
        self.level < other.level
    }
}

fn argmax<'x>(scored: impl Iterator<Item = (&'x Action, CandidateScore)>) -> Option<&'x Action> {
    let mut best: Option<(&Action, CandidateScore)> = None;
    for (action, s) in scored {
        if best.as_ref().is_none_or(|(_, b)| s.beats(b)) {
            best = Some((action, s));
        }
    }
    best.map(|(a, _)| a)
}

/// Cached estimates for one `(node, l)` pair, valid while the node's sample is unchanged.
struct GroupEstimate {
    version: u64,
    exclude: BTreeSet<EntityId>,
    gains: BTreeMap<u32, GainEstimate<f64>>,
}

struct Estimator {
    method: GainMethod,
    groups: HashMap<(NodeId, u32), GroupEstimate>,
    models: HashMap<NodeId, (u64, KModel<f64>)>,
}

impl Estimator {
    fn new(method: GainMethod) -> Self {
        Self { method, groups: HashMap::new(), models: HashMap::new() }
    }

    /// Records the node's current K and refits its curve when the sample changed.
    fn k_model(&mut self, runner: &mut Runner<'_, '_>, node: &NodeId) -> KModel<f64> {
        let version = runner.store.version(node);
        if let Some((v, m)) = self.models.get(node) {
            if *v == version {
                return *m;
            }
        }
        let cfg = &runner.settings.estimator;
        let stats = runner.store.stats(node);
        let model = match k_observation::<f64>(&stats, cfg) {
            Some(k) => {
                let state = runner.store.node_mut(node);
                state.record_k(stats.n, k.value);
                KModel::fit(&state.k_history, cfg.min_k_history)
            }
            None => KModel::InsufficientData,
        };
        self.models.insert(node.clone(), (version, model));
        model
    }

    fn refresh(&mut self, runner: &mut Runner<'_, '_>, node: &NodeId, l: u32) {
        let version = runner.store.version(node);
        let key = (node.clone(), l);
        if self.groups.get(&key).is_some_and(|g| g.version == version) {
            return;
        }
        let model = match self.method {
            GainMethod::NewRegr => self.k_model(runner, node),
            _ => KModel::InsufficientData,
        };
        let ks: Vec<u32> = runner.settings.configs.iter().filter(|c| c.l == l).map(|c| c.k).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
            runner.seed,
            ESTIMATE_STREAM,
            runner.t(),
            node.digest(),
            l as u64,
        ]));
        let exclude = draw_exclude_list(&runner.store, node, l, &mut rng);
        let estimates = estimate_group(
            self.method,
            runner.domain,
            &runner.store,
            node,
            &exclude,
            &ks,
            &model,
            &runner.settings.estimator,
            rng.gen(),
        );
        self.groups.insert(key, GroupEstimate { version, exclude, gains: ks.into_iter().zip(estimates).collect() });
    }

    fn get(&self, action: &Action) -> &GainEstimate<f64> {
        &self.groups[&(action.node.clone(), action.config.l)].gains[&action.config.k]
    }

    fn exclude(&self, action: &Action) -> BTreeSet<EntityId> {
        self.groups[&(action.node.clone(), action.config.l)].exclude.clone()
    }
}

/// GS* and RootChao: optimistic gain-per-cost selection with action elimination.
/// With `expand = false` the action set never leaves the root.
pub(super) fn run_estimated<'d>(
    domain: &'d Domain,
    oracle: &mut CrowdOracle<'d>,
    budget: f64,
    seed: u64,
    settings: &PolicySettings,
    method: GainMethod,
    expand: bool,
) -> Result<Run, PolicyError> {
    let mut runner = Runner::new(domain, oracle, budget, seed, settings);
    let mut estimator = Estimator::new(method);
    let mut actions = runner.root_actions();
    loop {
        runner.retain_live(&mut actions);
        if !actions.iter().any(|a| runner.affordable_action(a)) {
            break;
        }
        let groups: BTreeSet<(NodeId, u32)> = actions.iter().map(|a| (a.node.clone(), a.config.l)).collect();
        for (node, l) in &groups {
            estimator.refresh(&mut runner, node, *l);
        }

        let t = runner.t();
        let list: Vec<Action> = actions.iter().cloned().collect();
        let bands: Vec<Band<f64>> = list
            .iter()
            .map(|a| {
                let e = estimator.get(a);
                Band { mean: e.mean, sigma: sigma(e.variance, runner.store.query_count(&a.node), t) }
            })
            .collect();
        let compared: Option<Vec<Band<f64>>> = match settings.elimination {
            Elimination::Gain => Some(bands.clone()),
            Elimination::GainPerCost => Some(
                list.iter()
                    .zip(&bands)
                    .map(|(a, b)| {
                        let c = runner.cost_of(&a.node, a.config);
                        Band { mean: b.mean / c, sigma: b.sigma / c }
                    })
                    .collect(),
            ),
            Elimination::Off => None,
        };
        if let Some(compared) = compared {
            let best_lower = compared.iter().map(Band::lower).fold(f64::NEG_INFINITY, f64::max);
            for ((a, b), bad) in list.iter().zip(&compared).zip(bad_actions(&compared)) {
                if bad {
                    actions.remove(a);
                    runner.pruned.push(Pruned { round: t, action: a.clone(), upper: b.upper(), best_lower });
                }
            }
        }

        let candidates =
            list.iter().zip(&bands).filter(|(a, _)| actions.contains(a) && runner.affordable_action(a)).map(
                |(a, b)| {
                    let cost = runner.cost_of(&a.node, a.config);
                    let score = CandidateScore { score: b.upper() / cost, cost, level: domain.poset.level(&a.node) };
                    (a, score)
                },
            );
        // Elimination may leave only actions the remaining budget cannot pay for.
        let Some(chosen) = argmax(candidates).cloned() else {
            break;
        };

        let exclude = estimator.exclude(&chosen);
        runner.execute(&chosen.node, chosen.config, exclude)?;
        if expand {
            runner.expand(&mut actions, &chosen.node)?;
        }
    }
    Ok(runner.finish())
}

/// GSExact: every candidate is executed speculatively against a snapshot of
/// the crowd; the best realized gain per cost is then committed.
pub(super) fn run_exact<'d>(
    domain: &'d Domain,
    oracle: &mut CrowdOracle<'d>,
    budget: f64,
    seed: u64,
    settings: &PolicySettings,
) -> Result<Run, PolicyError> {
    let mut runner = Runner::new(domain, oracle, budget, seed, settings);
    let mut actions = runner.root_actions();
    loop {
        runner.retain_live(&mut actions);
        actions.retain(|a| runner.affordable_action(a));
        if actions.is_empty() {
            break;
        }
        let t = runner.t();
        let mut excludes: HashMap<(NodeId, u32), BTreeSet<EntityId>> = HashMap::new();
        for a in &actions {
            excludes.entry((a.node.clone(), a.config.l)).or_insert_with(|| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[
                    seed,
                    EXACT_STREAM,
                    t,
                    a.node.digest(),
                    a.config.l as u64,
                ]));
                draw_exclude_list(&runner.store, &a.node, a.config.l, &mut rng)
            });
        }

        let snapshot = runner.oracle.snapshot();
        let mut scored = Vec::with_capacity(actions.len());
        for a in &actions {
            runner.oracle.restore(&snapshot)?;
            let query =
                Query { node: a.node.clone(), k: a.config.k, exclude: excludes[&(a.node.clone(), a.config.l)].clone() };
            let response = runner.oracle.respond(&query)?;
            let realized = response.entities.iter().filter(|&&e| !runner.store.ledger().contains(e)).count();
            let cost = runner.cost_of(&a.node, a.config);
            scored
                .push((a, CandidateScore { score: realized as f64 / cost, cost, level: domain.poset.level(&a.node) }));
        }
        let chosen = argmax(scored.into_iter()).expect("nonempty").clone();
        // Replaying from the snapshot reproduces the speculative answer.
        runner.oracle.restore(&snapshot)?;
        let exclude = excludes[&(chosen.node.clone(), chosen.config.l)].clone();
        runner.execute(&chosen.node, chosen.config, exclude)?;
        runner.expand(&mut actions, &chosen.node)?;
    }
    Ok(runner.finish())
}
