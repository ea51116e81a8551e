//! Population sizes and overlaps of the most populous nodes.

use crate::domain::{Domain, EntityId, NodeId};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodePopulation {
    pub node: String,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InspectReport {
    pub attributes: usize,
    pub entities: usize,
    /// Size of the full poset.
    pub poset_nodes: u128,
    pub populated_nodes: usize,
    /// Every populated node, largest first.
    pub populations: Vec<NodePopulation>,
    /// The most populous nodes, in the order of the Jaccard matrix.
    pub top: Vec<String>,
    pub jaccard: Vec<Vec<f64>>,
}

/// Populated nodes with their sorted members, largest population first, ties in coordinate order.
pub fn populations(domain: &Domain) -> Vec<(NodeId, Vec<EntityId>)> {
    let mut map: HashMap<NodeId, Vec<EntityId>> = HashMap::new();
    for id in domain.catalog.ids() {
        for node in domain.poset.containing_nodes(domain.catalog.get(id)) {
            map.entry(node).or_default().push(id);
        }
    }
    let mut out: Vec<(NodeId, Vec<EntityId>)> = map
        .into_iter()
        .map(|(node, mut members)| {
            members.sort_unstable();
            (node, members)
        })
        .collect();
    out.sort_by(|a, b| b.1.len().cmp(&a.1.len()).then_with(|| a.0.cmp(&b.0)));
    out
}

/// `|a ∩ b| / |a ∪ b|` for sorted, duplicate-free id lists; 1 when both are empty.
pub fn jaccard(a: &[EntityId], b: &[EntityId]) -> f64 {
    let (mut i, mut j, mut common) = (0, 0, 0usize);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                common += 1;
                i += 1;
                j += 1;
            }
        }
    }
    let union = a.len() + b.len() - common;
    if union == 0 {
        1.0
    } else {
        common as f64 / union as f64
    }
}

pub fn inspect(domain: &Domain, top_n: usize) -> InspectReport {
    let pops = populations(domain);
    let top: Vec<&(NodeId, Vec<EntityId>)> = pops.iter().take(top_n).collect();
    let jaccard_matrix = top.iter().map(|(_, a)| top.iter().map(|(_, b)| jaccard(a, b)).collect()).collect();
    InspectReport {
        attributes: domain.poset.dims(),
        entities: domain.catalog.len(),
        poset_nodes: domain.poset.node_count(),
        populated_nodes: pops.len(),
        populations: pops
            .iter()
            .map(|(node, members)| NodePopulation { node: domain.poset.format_node(node), size: members.len() })
            .collect(),
        top: top.iter().map(|(node, _)| domain.poset.format_node(node)).collect(),
        jaccard: jaccard_matrix,
    }
}
