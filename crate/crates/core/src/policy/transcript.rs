//! Per-round record of a run and its CSV form.

use super::cost::QueryConfig;
use super::PolicyError;
use crate::domain::{Domain, EntityId, NodeId};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct TranscriptRow {
    pub round: u64,
    pub node: NodeId,
    pub config: QueryConfig,
    pub exclude: Vec<EntityId>,
    pub returned: Vec<EntityId>,
    pub gain: u32,
    pub cost: f64,
    pub cumulative_unique: u64,
    pub cumulative_cost: f64,
}

/// Flat CSV record: node as `attr=value;...`, entity lists as space-separated catalog ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptRecord {
    pub round: u64,
    pub node: String,
    pub k: u32,
    pub l: u32,
    pub exclude: String,
    pub returned: String,
    pub gain: u32,
    pub cost: f64,
    pub cumulative_unique: u64,
    pub cumulative_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Transcript {
    pub rows: Vec<TranscriptRow>,
}

impl Transcript {
    pub fn rounds(&self) -> usize {
        self.rows.len()
    }

    pub fn unique(&self) -> u64 {
        self.rows.last().map_or(0, |r| r.cumulative_unique)
    }

    pub fn cost(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cumulative_cost)
    }

    /// Cumulative unique count after each round.
    pub fn unique_curve(&self) -> Vec<u64> {
        self.rows.iter().map(|r| r.cumulative_unique).collect()
    }

    /// First round (1-based) at which at least `target` unique entities were held.
    pub fn rounds_to_reach(&self, target: u64) -> Option<usize> {
        if target == 0 {
            return Some(0);
        }
        self.rows.iter().position(|r| r.cumulative_unique >= target).map(|i| i + 1)
    }

    pub fn to_records(&self, domain: &Domain) -> Vec<TranscriptRecord> {
        let names =
            |ids: &[EntityId]| ids.iter().map(|&id| domain.catalog.get(id).id.as_str()).collect::<Vec<_>>().join(" ");
        self.rows
            .iter()
            .map(|r| TranscriptRecord {
                round: r.round,
                node: domain.poset.format_node(&r.node),
                k: r.config.k,
                l: r.config.l,
                exclude: names(&r.exclude),
                returned: names(&r.returned),
                gain: r.gain,
                cost: r.cost,
                cumulative_unique: r.cumulative_unique,
                cumulative_cost: r.cumulative_cost,
            })
            .collect()
    }

    pub fn from_records(domain: &Domain, records: &[TranscriptRecord]) -> Result<Self, PolicyError> {
        let ids = |text: &str| -> Result<Vec<EntityId>, PolicyError> {
            text.split_whitespace()
                .map(|name| {
                    domain
                        .catalog
                        .lookup(name)
                        .ok_or_else(|| PolicyError::Transcript(format!("unknown entity `{name}`")))
                })
                .collect()
        };
        let rows = records
            .iter()
            .map(|r| {
                Ok(TranscriptRow {
                    round: r.round,
                    node: domain.poset.parse_node(&r.node)?,
                    config: QueryConfig::new(r.k, r.l),
                    exclude: ids(&r.exclude)?,
                    returned: ids(&r.returned)?,
                    gain: r.gain,
                    cost: r.cost,
                    cumulative_unique: r.cumulative_unique,
                    cumulative_cost: r.cumulative_cost,
                })
            })
            .collect::<Result<Vec<_>, PolicyError>>()?;
        Ok(Transcript { rows })
    }

    pub fn write_csv<W: Write>(&self, domain: &Domain, out: W) -> Result<(), PolicyError> {
        let mut w = csv::Writer::from_writer(out);
        for rec in self.to_records(domain) {
            w.serialize(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(domain: &Domain, input: R) -> Result<Self, PolicyError> {
        let mut r = csv::Reader::from_reader(input);
        let records = r.deserialize().collect::<Result<Vec<TranscriptRecord>, csv::Error>>()?;
        Self::from_records(domain, &records)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{simulate, Policy, PolicySettings};

    fn domain() -> Domain {
        Domain::from_json(
            r#"{
                "attributes": [{"name": "A", "root": {"value": "*", "children": [{"value": "a1"}, {"value": "a2"}]}}],
                "entities": [
                    {"id": "x", "leaf": {"A": "a1"}, "popularity": 2.0},
                    {"id": "y", "leaf": {"A": "a1"}, "popularity": 1.0},
                    {"id": "z", "leaf": {"A": "a2"}, "popularity": 1.0}
                ]
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn csv_round_trip_preserves_rows() {
        let d = domain();
        let run = simulate(Policy::GSChao, &d, 6.0, 2, &PolicySettings::standard(&d)).unwrap();
        assert!(run.transcript.rounds() > 0);
        let mut buf = Vec::new();
        run.transcript.write_csv(&d, &mut buf).unwrap();
        let back = Transcript::read_csv(&d, buf.as_slice()).unwrap();
        assert_eq!(back, run.transcript);
    }

    #[test]
    fn unknown_entity_is_rejected() {
        let d = domain();
        let rec = TranscriptRecord {
            round: 1,
            node: "*".into(),
            k: 5,
            l: 0,
            exclude: String::new(),
            returned: "x nobody".into(),
            gain: 1,
            cost: 1.0,
            cumulative_unique: 1,
            cumulative_cost: 1.0,
        };
        assert!(matches!(Transcript::from_records(&d, &[rec]), Err(PolicyError::Transcript(_))));
    }

    #[test]
    fn rounds_to_reach_targets() {
        let row = |round, unique| TranscriptRow {
            round,
            node: NodeId::new(vec![0]),
            config: QueryConfig::new(5, 0),
            exclude: vec![],
            returned: vec![],
            gain: 0,
            cost: 1.0,
            cumulative_unique: unique,
            cumulative_cost: round as f64,
        };
        let t = Transcript { rows: vec![row(1, 3), row(2, 3), row(3, 7)] };
        assert_eq!(t.rounds_to_reach(0), Some(0));
        assert_eq!(t.rounds_to_reach(3), Some(1));
        assert_eq!(t.rounds_to_reach(4), Some(3));
        assert_eq!(t.rounds_to_reach(8), None);
        assert_eq!(t.unique_curve(), vec![3, 3, 7]);
    }
}
