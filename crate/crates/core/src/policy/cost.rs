//! Query configurations and the linear query-cost model.

use super::PolicyError;
use crate::domain::NodeId;
use crate::scalar::Real;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Requested answer count `k` and exclude-list size `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct QueryConfig {
    pub k: u32,
    pub l: u32,
}

impl QueryConfig {
    pub const fn new(k: u32, l: u32) -> Self {
        Self { k, l }
    }
}

impl fmt::Display for QueryConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.k, self.l)
    }
}

impl FromStr for QueryConfig {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PolicyError::BadConfig(s.to_string());
        let (k, l) = s.trim().split_once(':').ok_or_else(bad)?;
        let k: u32 = k.trim().parse().map_err(|_| bad())?;
        let l: u32 = l.trim().parse().map_err(|_| bad())?;
        if k == 0 {
            return Err(bad());
        }
        Ok(QueryConfig { k, l })
    }
}

pub const DEFAULT_CONFIGS: [QueryConfig; 7] = [
    QueryConfig::new(5, 0),
    QueryConfig::new(10, 0),
    QueryConfig::new(20, 0),
    QueryConfig::new(5, 2),
    QueryConfig::new(10, 5),
    QueryConfig::new(20, 5),
    QueryConfig::new(20, 10),
];

/// Parses `"k:l,k:l,..."`. Duplicates are dropped; order is preserved.
pub fn parse_configs(text: &str) -> Result<Vec<QueryConfig>, PolicyError> {
    let mut out: Vec<QueryConfig> = Vec::new();
    for part in text.split(',').filter(|p| !p.trim().is_empty()) {
        let c: QueryConfig = part.parse()?;
        if !out.contains(&c) {
            out.push(c);
        }
    }
    if out.is_empty() {
        return Err(PolicyError::BadConfig(text.to_string()));
    }
    Ok(out)
}

/// A node paired with a query configuration.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub node: NodeId,
    pub config: QueryConfig,
}

/// `cost = alpha k / max_k + beta l / max_l + gamma s / max_spec`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostModel<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    pub max_k: u32,
    pub max_l: u32,
    pub max_spec: u32,
}

impl<T: Real> CostModel<T> {
    pub fn new(alpha: T, beta: T, gamma: T, max_k: u32, max_l: u32, max_spec: u32) -> Result<Self, PolicyError> {
        let model = Self { alpha, beta, gamma, max_k, max_l, max_spec };
        model.validate()?;
        Ok(model)
    }

    /// `alpha = gamma = 1`, `beta = 5`, normalizers taken from `configs` and the attribute count.
    pub fn standard(configs: &[QueryConfig], dims: usize) -> Result<Self, PolicyError> {
        Self::for_configs(T::one(), T::lit(5.0), T::one(), configs, dims)
    }

    pub fn for_configs(alpha: T, beta: T, gamma: T, configs: &[QueryConfig], dims: usize) -> Result<Self, PolicyError> {
        let max_k = configs.iter().map(|c| c.k).max().unwrap_or(1).max(1);
        let max_l = configs.iter().map(|c| c.l).max().unwrap_or(1).max(1);
        Self::new(alpha, beta, gamma, max_k, max_l, dims.max(1) as u32)
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let z = T::zero();
        let finite = [self.alpha, self.beta, self.gamma].iter().all(|x| x.is_finite());
        if !finite || self.alpha <= z || self.beta < z || self.gamma < z {
            return Err(PolicyError::BadCost("alpha must be positive and beta, gamma nonnegative".into()));
        }
        if !(self.beta > self.alpha && self.beta > self.gamma) {
            return Err(PolicyError::BadCost("the exclude-list weight beta must exceed alpha and gamma".into()));
        }
        if self.max_k == 0 || self.max_l == 0 || self.max_spec == 0 {
            return Err(PolicyError::BadCost("normalizers must be positive".into()));
        }
        Ok(())
    }

    pub fn cost(&self, config: QueryConfig, specificity: u32) -> T {
        self.alpha * T::count(config.k as u64) / T::count(self.max_k as u64)
            + self.beta * T::count(config.l as u64) / T::count(self.max_l as u64)
            + self.gamma * T::count(specificity as u64) / T::count(self.max_spec as u64)
    }
}
