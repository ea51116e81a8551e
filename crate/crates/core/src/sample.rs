//! Per-node running samples, negative-answer bookkeeping and the global ledger.

use crate::domain::{Domain, EntityId, NodeId};
use crate::oracle::QueryResponse;
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// Frequency-of-frequencies summary of a sample.
///
/// `f(i)` is the number of entities seen exactly `i` times; `n` is the
/// total number of occurrences and `distinct` the number of entities.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrequencyStats {
    pub n: u64,
    pub distinct: u64,
    f: Vec<u64>,
}

impl FrequencyStats {
    /// Builds the histogram from per-entity occurrence counts (zeros ignored).
    pub fn from_counts(counts: impl IntoIterator<Item = u32>) -> Self {
        let mut stats = Self::default();
        for c in counts {
            if c == 0 {
                continue;
            }
            let c = c as usize;
            if stats.f.len() <= c {
                stats.f.resize(c + 1, 0);
            }
            stats.f[c] += 1;
            stats.n += c as u64;
            stats.distinct += 1;
        }
        stats
    }

    /// Builds stats directly from a histogram `i -> f_i`.
    pub fn from_histogram(hist: impl IntoIterator<Item = (u32, u64)>) -> Self {
        let mut stats = Self::default();
        for (i, fi) in hist {
            if i == 0 || fi == 0 {
                continue;
            }
            let i = i as usize;
            if stats.f.len() <= i {
                stats.f.resize(i + 1, 0);
            }
            stats.f[i] += fi;
            stats.n += i as u64 * fi;
            stats.distinct += fi;
        }
        stats
    }

    #[inline]
    pub fn f(&self, i: usize) -> u64 {
        self.f.get(i).copied().unwrap_or(0)
    }

    pub fn f1(&self) -> u64 {
        self.f(1)
    }

    pub fn f2(&self) -> u64 {
        self.f(2)
    }

    /// Largest multiplicity present.
    pub fn max_frequency(&self) -> usize {
        self.f.iter().rposition(|&x| x > 0).unwrap_or(0)
    }

    /// Nonzero `(i, f_i)` pairs in ascending `i`.
    pub fn histogram(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.f.iter().enumerate().filter(|(i, &fi)| *i > 0 && fi > 0).map(|(i, &fi)| (i, fi))
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub node: NodeId,
    pub occurrences: BTreeMap<EntityId, u32>,
    pub dead: bool,
    pub query_count: u32,
    /// `(sample size, estimated K)` observations feeding the K-curve fit.
    pub k_history: Vec<(u64, f64)>,
    /// Bumped whenever `occurrences` changes.
    pub version: u64,
}

impl NodeState {
    fn new(node: NodeId) -> Self {
        Self { node, occurrences: BTreeMap::new(), dead: false, query_count: 0, k_history: Vec::new(), version: 0 }
    }

    pub fn stats(&self) -> FrequencyStats {
        FrequencyStats::from_counts(self.occurrences.values().copied())
    }

    pub fn stats_excluding(&self, exclude: &BTreeSet<EntityId>) -> FrequencyStats {
        FrequencyStats::from_counts(self.occurrences.iter().filter(|(id, _)| !exclude.contains(id)).map(|(_, &c)| c))
    }

    /// Records a K estimate at sample size `n`, replacing an earlier one at the same size.
    pub fn record_k(&mut self, n: u64, k: f64) {
        match self.k_history.iter_mut().find(|(m, _)| *m == n) {
            Some(slot) => slot.1 = k,
            None => self.k_history.push((n, k)),
        }
    }
}

/// Globally distinct extracted entities and money spent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ExtractionLedger {
    extracted: BTreeSet<EntityId>,
    cost_spent: f64,
}

impl ExtractionLedger {
    pub fn contains(&self, id: EntityId) -> bool {
        self.extracted.contains(&id)
    }

    pub fn len(&self) -> usize {
        self.extracted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.extracted.is_empty()
    }

    pub fn extracted(&self) -> &BTreeSet<EntityId> {
        &self.extracted
    }

    pub fn cost_spent(&self) -> f64 {
        self.cost_spent
    }

    pub fn debit(&mut self, cost: f64) {
        self.cost_spent += cost;
    }

    fn insert(&mut self, id: EntityId) -> bool {
        self.extracted.insert(id)
    }
}

#[derive(Debug, Clone, Default)]
pub struct SampleStore {
    nodes: HashMap<NodeId, NodeState>,
    dead: BTreeSet<NodeId>,
    ledger: ExtractionLedger,
}

impl SampleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn ledger(&self) -> &ExtractionLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut ExtractionLedger {
        &mut self.ledger
    }

    pub fn node(&self, v: &NodeId) -> Option<&NodeState> {
        self.nodes.get(v)
    }

    pub fn node_mut(&mut self, v: &NodeId) -> &mut NodeState {
        self.nodes.entry(v.clone()).or_insert_with(|| NodeState::new(v.clone()))
    }

    pub fn touched_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Merges a response obtained at `queried` into every node containing
    /// each returned entity, and returns the number of globally new entities.
    /// An empty response marks `queried` dead.
    pub fn ingest(&mut self, domain: &Domain, queried: &NodeId, response: &QueryResponse) -> u32 {
        self.node_mut(queried).query_count += 1;
        if response.is_empty() {
            self.node_mut(queried).dead = true;
            self.dead.insert(queried.clone());
            return 0;
        }
        let mut gain = 0;
        for &id in &response.entities {
            for v in domain.poset.containing_nodes(domain.catalog.get(id)) {
                let state = self.node_mut(&v);
                *state.occurrences.entry(id).or_insert(0) += 1;
                state.version += 1;
            }
            if self.ledger.insert(id) {
                gain += 1;
            }
        }
        gain
    }

    pub fn stats(&self, v: &NodeId) -> FrequencyStats {
        self.nodes.get(v).map(NodeState::stats).unwrap_or_default()
    }

    pub fn stats_excluding(&self, v: &NodeId, exclude: &BTreeSet<EntityId>) -> FrequencyStats {
        self.nodes.get(v).map(|s| s.stats_excluding(exclude)).unwrap_or_default()
    }

    /// True if `v` or any ancestor of `v` returned a negative answer.
    pub fn is_dead(&self, domain: &Domain, v: &NodeId) -> bool {
        self.dead.iter().any(|d| domain.poset.generalizes(d, v))
    }

    /// Distinct entities observed at `v`, ascending.
    pub fn distinct_entities(&self, v: &NodeId) -> Vec<EntityId> {
        self.nodes.get(v).map(|s| s.occurrences.keys().copied().collect()).unwrap_or_default()
    }

    pub fn version(&self, v: &NodeId) -> u64 {
        self.nodes.get(v).map(|s| s.version).unwrap_or(0)
    }

    pub fn query_count(&self, v: &NodeId) -> u32 {
        self.nodes.get(v).map(|s| s.query_count).unwrap_or(0)
    }
}
