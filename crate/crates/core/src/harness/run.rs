//! Multi-seed runs and budget sweeps.

use super::HarnessError;
use crate::domain::Domain;
use crate::policy::{simulate, Policy, PolicySettings, Transcript};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub policy: Policy,
    pub budget: f64,
    pub seeds: Vec<u64>,
    pub settings: PolicySettings,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(self.budget.is_finite() && self.budget > 0.0) {
            return Err(HarnessError::Spec(format!("budget must be positive, got {}", self.budget)));
        }
        if self.seeds.is_empty() {
            return Err(HarnessError::Spec("at least one seed is required".into()));
        }
        self.settings.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub unique: u64,
    pub cost: f64,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub policy: Policy,
    pub budget: f64,
    pub unique_mean: f64,
    pub unique_std: f64,
    pub cost_mean: f64,
    pub rounds_mean: f64,
    pub runs: Vec<SeedOutcome>,
}

impl RunSummary {
    pub fn from_outcomes(policy: Policy, budget: f64, runs: Vec<SeedOutcome>) -> Self {
        let unique: Vec<f64> = runs.iter().map(|r| r.unique as f64).collect();
        let (unique_mean, unique_std) = mean_std(&unique);
        let cost_mean = mean_std(&runs.iter().map(|r| r.cost).collect::<Vec<_>>()).0;
        let rounds_mean = mean_std(&runs.iter().map(|r| r.rounds as f64).collect::<Vec<_>>()).0;
        Self { policy, budget, unique_mean, unique_std, cost_mean, rounds_mean, runs }
    }
}

/// Mean and sample standard deviation (0 for fewer than two values).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One transcript per seed plus the summary.
pub fn run_experiment(domain: &Domain, cfg: &RunConfig) -> Result<(Vec<(u64, Transcript)>, RunSummary), HarnessError> {
    cfg.validate()?;
    let mut transcripts = Vec::with_capacity(cfg.seeds.len());
    let mut outcomes = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let run = simulate(cfg.policy, domain, cfg.budget, seed, &cfg.settings)?;
        outcomes.push(SeedOutcome {
            seed,
            unique: run.transcript.unique(),
            cost: run.transcript.cost(),
            rounds: run.transcript.rounds(),
        });
        transcripts.push((seed, run.transcript));
    }
    Ok((transcripts, RunSummary::from_outcomes(cfg.policy, cfg.budget, outcomes)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub policy: Policy,
    pub budget: f64,
    pub seed: u64,
    pub unique: u64,
    pub rounds: usize,
}

/// Every `(policy, budget, seed)` cell, in that nesting order.
pub fn sweep(
    domain: &Domain,
    policies: &[Policy],
    budgets: &[f64],
    seeds: &[u64],
    settings: &PolicySettings,
) -> Result<Vec<SweepRow>, HarnessError> {
    if budgets.is_empty() || budgets.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(HarnessError::Spec("budgets must be positive".into()));
    }
    if budgets.windows(2).any(|w| w[0] >= w[1]) {
        return Err(HarnessError::Spec("budgets must be strictly ascending".into()));
    }
    if seeds.is_empty() || policies.is_empty() {
        return Err(HarnessError::Spec("need at least one policy and one seed".into()));
    }
    settings.validate()?;
    let mut rows = Vec::with_capacity(policies.len() * budgets.len() * seeds.len());
    for &policy in policies {
        for &budget in budgets {
            for &seed in seeds {
                let t = simulate(policy, domain, budget, seed, settings)?.transcript;
                rows.push(SweepRow { policy, budget, seed, unique: t.unique(), rounds: t.rounds() });
            }
        }
    }
    Ok(rows)
}

pub fn write_sweep<W: std::io::Write>(rows: &[SweepRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_sweep<R: std::io::Read>(input: R) -> Result<Vec<SweepRow>, HarnessError> {
    Ok(csv::Reader::from_reader(input).deserialize().collect::<Result<Vec<SweepRow>, csv::Error>>()?)
}
