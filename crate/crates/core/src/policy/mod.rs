//! Budgeted querying policies.
//!
//! The adaptive policies (`GS*`) keep a set of candidate actions, score each
//! by `(mean gain + sigma) / cost`, issue the best affordable one, then grow
//! the set with the direct descendants of the queried node and drop actions
//! that are dead or provably worse than another candidate.
//! `GSExact` replaces estimates by speculative execution against the
//! simulated crowd. The baselines ignore estimates altogether.

mod bandit;
mod baselines;
mod cost;
mod engine;
mod transcript;

pub use bandit::{bad_actions, sigma, Band, VARIANCE_FLOOR};
pub use cost::{parse_configs, Action, CostModel, QueryConfig, DEFAULT_CONFIGS};
pub use engine::CandidateScore;
pub use transcript::{Transcript, TranscriptRecord, TranscriptRow};

use crate::domain::{splitmix, Domain, DomainError};
use crate::estimators::{EstimatorConfig, GainMethod};
use crate::oracle::{CrowdOracle, OracleError};
use crate::sample::SampleStore;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("unknown policy `{0}`; expected one of GSChao, GSHwang, GSNewR, GSExact, Rand, RandL, BFS, RootChao")]
    UnknownPolicy(String),
    #[error("malformed query configuration `{0}`; expected `k:l` with k >= 1")]
    BadConfig(String),
    #[error("invalid cost model: {0}")]
    BadCost(String),
    #[error("budget must be positive and finite, got {0}")]
    BadBudget(f64),
    #[error("transcript: {0}")]
    Transcript(String),
    #[error("transcript csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("transcript io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Policy {
    GSChao,
    GSHwang,
    GSNewR,
    GSExact,
    Rand,
    RandL,
    BFS,
    RootChao,
}

impl Policy {
    pub const ALL: [Policy; 8] = [
        Policy::GSChao,
        Policy::GSHwang,
        Policy::GSNewR,
        Policy::GSExact,
        Policy::Rand,
        Policy::RandL,
        Policy::BFS,
        Policy::RootChao,
    ];

    /// Estimator driving an estimate-based policy.
    pub fn method(self) -> Option<GainMethod> {
        match self {
            Policy::GSChao | Policy::RootChao => Some(GainMethod::Chao92Shen),
            Policy::GSHwang => Some(GainMethod::HwangShen),
            Policy::GSNewR => Some(GainMethod::NewRegr),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Policy::GSChao => "GSChao",
            Policy::GSHwang => "GSHwang",
            Policy::GSNewR => "GSNewR",
            Policy::GSExact => "GSExact",
            Policy::Rand => "Rand",
            Policy::RandL => "RandL",
            Policy::BFS => "BFS",
            Policy::RootChao => "RootChao",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| PolicyError::UnknownPolicy(s.to_string()))
    }
}

/// Which confidence bounds the bad-action rule compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Elimination {
    /// `mean + sigma < max(mean' - sigma')` on raw gains.
    Gain,
    /// The same inequality on gain per unit cost.
    GainPerCost,
    Off,
}

impl FromStr for Elimination {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gain" => Ok(Elimination::Gain),
            "gain-per-cost" | "ratio" => Ok(Elimination::GainPerCost),
            "off" | "none" => Ok(Elimination::Off),
            _ => Err(PolicyError::BadConfig(format!("elimination `{s}`"))),
        }
    }
}

/// Everything about a run except the policy, budget and seed.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySettings {
    pub configs: Vec<QueryConfig>,
    pub cost: CostModel<f64>,
    pub estimator: EstimatorConfig,
    pub elimination: Elimination,
}

impl PolicySettings {
    /// Default configuration set and cost weights for `domain`.
    pub fn standard(domain: &Domain) -> Self {
        Self {
            configs: DEFAULT_CONFIGS.to_vec(),
            cost: CostModel::standard(&DEFAULT_CONFIGS, domain.poset.dims()).expect("default cost model is valid"),
            estimator: EstimatorConfig::default(),
            elimination: Elimination::Gain,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.configs.is_empty() {
            return Err(PolicyError::BadConfig(String::new()));
        }
        if let Some(c) = self.configs.iter().find(|c| c.k == 0) {
            return Err(PolicyError::BadConfig(c.to_string()));
        }
        self.cost.validate()
    }
}

/// An action removed by the bad-action rule, with the bounds it was compared on.
#[derive(Debug, Clone, PartialEq)]
pub struct Pruned {
    /// Round about to be issued when the action was removed.
    pub round: u64,
    pub action: Action,
    pub upper: f64,
    pub best_lower: f64,
}

/// Outcome of one run: the transcript, the final sample store and the eliminated actions.
#[derive(Debug, Clone)]
pub struct Run {
    pub transcript: Transcript,
    pub store: SampleStore,
    pub pruned: Vec<Pruned>,
}

/// Seed of an independent random stream derived from `parts`.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts.iter().fold(0x6a09_e667_f3bc_c908u64, |h, &p| splitmix(h ^ splitmix(p)))
}

const ORACLE_STREAM: u64 = 0x0a11;

/// Runs `policy` against `oracle` until the budget is exhausted or nothing is affordable.
pub fn run_policy<'d>(
    policy: Policy,
    domain: &'d Domain,
    oracle: &mut CrowdOracle<'d>,
    budget: f64,
    seed: u64,
    settings: &PolicySettings,
) -> Result<Run, PolicyError> {
    if !(budget.is_finite() && budget > 0.0) {
        return Err(PolicyError::BadBudget(budget));
    }
    settings.validate()?;
    match policy {
        Policy::GSChao | Policy::GSHwang | Policy::GSNewR => {
            engine::run_estimated(domain, oracle, budget, seed, settings, policy.method().unwrap(), true)
        }
        Policy::RootChao => {
            engine::run_estimated(domain, oracle, budget, seed, settings, GainMethod::Chao92Shen, false)
        }
        Policy::GSExact => engine::run_exact(domain, oracle, budget, seed, settings),
        Policy::Rand => baselines::run_random(domain, oracle, budget, seed, settings, false),
        Policy::RandL => baselines::run_random(domain, oracle, budget, seed, settings, true),
        Policy::BFS => baselines::run_bfs(domain, oracle, budget, seed, settings),
    }
}

/// [`run_policy`] with a crowd seeded from `seed`.
pub fn simulate(
    policy: Policy,
    domain: &Domain,
    budget: f64,
    seed: u64,
    settings: &PolicySettings,
) -> Result<Run, PolicyError> {
    let mut oracle = CrowdOracle::new(domain, derive_seed(&[seed, ORACLE_STREAM]));
    run_policy(policy, domain, &mut oracle, budget, seed, settings)
}
