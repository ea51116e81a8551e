//! Estimator accuracy against the true expected gain.
//!
//! Each trial warms up a fresh sample at one node with `q(warmup_k, {})`
//! queries until the sample size reaches a target fraction of the node's
//! population, then asks every estimator for the gain of each query
//! configuration and compares with [`true_gain`](super::truth::true_gain).

use super::truth::true_gain;
use super::HarnessError;
use crate::domain::{Domain, NodeId};
use crate::estimators::{draw_exclude_list, k_observation, point_gain, EstimatorConfig, GainMethod, KModel};
use crate::oracle::{CrowdOracle, Query};
use crate::policy::{derive_seed, QueryConfig, DEFAULT_CONFIGS};
use crate::sample::SampleStore;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// Guard for the relative error when the true gain is zero.
pub const REL_ERROR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub trials: usize,
    pub configs: Vec<QueryConfig>,
    /// Nodes to evaluate; `None` means every node with at least `min_population` entities.
    pub nodes: Option<Vec<NodeId>>,
    pub min_population: usize,
    /// Warm-up stops once `n / S` reaches a target drawn uniformly from this band.
    pub sample_ratio: (f64, f64),
    pub warmup_k: u32,
    /// Monte Carlo responses per true-gain evaluation.
    pub draws: usize,
    pub estimator: EstimatorConfig,
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trials: 200,
            configs: DEFAULT_CONFIGS.to_vec(),
            nodes: None,
            min_population: 300,
            sample_ratio: (0.1, 0.3),
            warmup_k: 5,
            draws: 2000,
            estimator: EstimatorConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub trial: usize,
    pub node: String,
    pub population: usize,
    pub n: u64,
    pub k: u32,
    pub l: u32,
    pub method: GainMethod,
    pub predicted: f64,
    pub truth: f64,
    pub truth_stderr: f64,
    pub abs_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Requested nodes that were skipped, with the reason.
    pub skipped: Vec<String>,
}

/// Mean absolute relative error per `(k, l, method)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub k: u32,
    pub l: u32,
    pub method: GainMethod,
    pub trials: usize,
    pub mean_abs_rel_error: f64,
}

pub fn eval_estimators(domain: &Domain, cfg: &EvalConfig) -> Result<EvalReport, HarnessError> {
    if cfg.configs.is_empty() || cfg.warmup_k == 0 {
        return Err(HarnessError::Spec("need at least one configuration and warmup k >= 1".into()));
    }
    let (lo, hi) = cfg.sample_ratio;
    if !(lo > 0.0 && lo <= hi) {
        return Err(HarnessError::Spec(format!("invalid sample-ratio band [{lo}, {hi}]")));
    }
    let mut report = EvalReport::default();
    let candidates: Vec<NodeId> = match &cfg.nodes {
        Some(list) => {
            let mut keep = Vec::new();
            for node in list {
                domain.poset.validate(node)?;
                if domain.population(node).is_empty() {
                    report.skipped.push(format!("{}: empty population", domain.poset.format_node(node)));
                } else {
                    keep.push(node.clone());
                }
            }
            keep
        }
        None => super::inspect::populations(domain)
            .into_iter()
            .filter(|(_, members)| members.len() >= cfg.min_population.max(1))
            .map(|(node, _)| node)
            .collect(),
    };
    if candidates.is_empty() {
        report.skipped.push("no node satisfies the population filter".into());
        return Ok(report);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, 0xe7a1]));
    for trial in 0..cfg.trials {
        let node = candidates.choose(&mut rng).expect("nonempty").clone();
        let population = domain.population(&node).len();
        let ratio = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let target = ((ratio * population as f64).ceil() as u64).max(1);

        let mut oracle = CrowdOracle::new(domain, derive_seed(&[cfg.seed, trial as u64, 0x0a]));
        let mut store = SampleStore::new();
        let warmup = Query::new(node.clone(), cfg.warmup_k);
        while store.stats(&node).n < target {
            let response = oracle.respond(&warmup)?;
            store.ingest(domain, &node, &response);
            let stats = store.stats(&node);
            if let Some(k) = k_observation::<f64>(&stats, &cfg.estimator) {
                store.node_mut(&node).record_k(stats.n, k.value);
            }
        }
        let n = store.stats(&node).n;
        let history = store.node(&node).map(|s| s.k_history.clone()).unwrap_or_default();
        let model = KModel::fit(&history, cfg.estimator.min_k_history);
        let ledger = store.ledger().extracted().clone();
        let label = domain.poset.format_node(&node);

        for (ci, config) in cfg.configs.iter().enumerate() {
            let exclude = draw_exclude_list(&store, &node, config.l, &mut rng);
            let stats = store.stats_excluding(&node, &exclude);
            let truth = true_gain(
                domain,
                &node,
                config.k,
                &exclude,
                &ledger,
                cfg.draws,
                derive_seed(&[cfg.seed, trial as u64, ci as u64, 0x7e]),
            );
            for method in GainMethod::ALL {
                let predicted = if stats.n == 0 {
                    config.k as f64
                } else {
                    point_gain(method, &stats, config.k, &model, &cfg.estimator)
                        .map_err(|e| HarnessError::Spec(e.to_string()))?
                };
                report.rows.push(EvalRow {
                    trial,
                    node: label.clone(),
                    population,
                    n,
                    k: config.k,
                    l: config.l,
                    method,
                    predicted,
                    truth: truth.mean,
                    truth_stderr: truth.stderr,
                    abs_rel_error: (predicted - truth.mean).abs() / truth.mean.max(REL_ERROR_EPS),
                });
            }
        }
    }
    Ok(report)
}

pub fn summarize(rows: &[EvalRow]) -> Vec<EvalSummary> {
    let mut acc: BTreeMap<(u32, u32, GainMethod), (usize, f64)> = BTreeMap::new();
    for r in rows {
        let e = acc.entry((r.k, r.l, r.method)).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += r.abs_rel_error;
    }
    acc.into_iter()
        .map(|((k, l, method), (trials, total))| EvalSummary {
            k,
            l,
            method,
            trials,
            mean_abs_rel_error: total / trials as f64,
        })
        .collect()
}

pub fn write_rows<W: std::io::Write>(rows: &[EvalRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_rows<R: std::io::Read>(input: R) -> Result<Vec<EvalRow>, HarnessError> {
    Ok(csv::Reader::from_reader(input).deserialize().collect::<Result<Vec<EvalRow>, csv::Error>>()?)
}
