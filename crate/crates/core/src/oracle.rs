//! Simulated crowd: popularity-weighted answers to `q(k, E)` at a node.
//!
//! A response of size `k` is a sequential weighted draw without
//! replacement from the node's population minus the exclude list. It is
//! realised with exponential clocks: each eligible entity gets the key
//! `-ln(u) / popularity` and the `k` smallest keys, in ascending order, are
//! the answer. This has the same law as drawing one entity at a time with
//! probability proportional to popularity and removing it from the pool.

use crate::domain::{Domain, DomainError, EntityId, NodeId};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("query size k must be at least 1")]
    ZeroK,
    #[error("exclude list names unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("snapshot belongs to a different catalog")]
    ForeignSnapshot,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub node: NodeId,
    pub k: u32,
    pub exclude: BTreeSet<EntityId>,
}

impl Query {
    pub fn new(node: NodeId, k: u32) -> Self {
        Self { node, k, exclude: BTreeSet::new() }
    }

    pub fn excluding(mut self, exclude: impl IntoIterator<Item = EntityId>) -> Self {
        self.exclude = exclude.into_iter().collect();
        self
    }
}

/// Distinct entities in draw order. Empty means a negative answer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QueryResponse {
    pub entities: Vec<EntityId>,
}

impl QueryResponse {
    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }
}

/// Generator state captured for speculative execution.
#[derive(Debug, Clone)]
pub struct OracleSnapshot {
    rng: ChaCha8Rng,
    catalog: u64,
}

pub struct CrowdOracle<'d> {
    domain: &'d Domain,
    rng: ChaCha8Rng,
}

impl<'d> CrowdOracle<'d> {
    pub fn new(domain: &'d Domain, seed: u64) -> Self {
        Self { domain, rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn domain(&self) -> &'d Domain {
        self.domain
    }

    pub fn respond(&mut self, q: &Query) -> Result<QueryResponse, OracleError> {
        self.domain.poset.validate(&q.node)?;
        if q.k == 0 {
            return Err(OracleError::ZeroK);
        }
        if let Some(&bad) = q.exclude.iter().find(|e| e.index() >= self.domain.catalog.len()) {
            return Err(OracleError::UnknownEntity(bad));
        }
        let population = self.domain.population(&q.node);
        let catalog = &self.domain.catalog;
        let mut keyed: Vec<(f64, EntityId)> = population
            .members
            .iter()
            .filter(|id| !q.exclude.contains(id))
            .map(|&id| {
                // u in (0, 1] keeps the log finite.
                let u: f64 = 1.0 - self.rng.gen::<f64>();
                (-u.ln() / catalog.get(id).popularity, id)
            })
            .collect();
        let take = (q.k as usize).min(keyed.len());
        if take < keyed.len() {
            keyed.select_nth_unstable_by(take, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            keyed.truncate(take);
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(QueryResponse { entities: keyed.into_iter().map(|(_, id)| id).collect() })
    }

    pub fn snapshot(&self) -> OracleSnapshot {
        OracleSnapshot { rng: self.rng.clone(), catalog: self.domain.catalog.fingerprint() }
    }

    pub fn restore(&mut self, snapshot: &OracleSnapshot) -> Result<(), OracleError> {
        if snapshot.catalog != self.domain.catalog.fingerprint() {
            return Err(OracleError::ForeignSnapshot);
        }
        self.rng = snapshot.rng.clone();
        Ok(())
    }
}
