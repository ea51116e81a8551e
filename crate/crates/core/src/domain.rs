//! Attribute hierarchies, the product poset over them, and the entity catalog.
//!
//! A node of the poset is a vector of value indices, one per attribute.
//! Index 0 of every hierarchy is the wildcard root `*`. Nodes are never
//! enumerated up front; order relations are computed from coordinates.

use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::hash::{Hash, Hasher};
use std::path::Path;
use std::sync::{Arc, RwLock};
use thiserror::Error;

pub const WILDCARD: &str = "*";

#[derive(Debug, Error)]
pub enum DomainError {
    #[error("cannot read domain file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed domain file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("domain declares no attributes")]
    NoAttributes,
    #[error("attribute `{0}` is declared twice")]
    DuplicateAttribute(String),
    #[error("attribute `{attribute}`: root value must be `*`, found `{found}`")]
    RootNotWildcard { attribute: String, found: String },
    #[error("attribute `{attribute}`: value `{value}` appears more than once")]
    DuplicateValue { attribute: String, value: String },
    #[error("entity `{0}` is declared twice")]
    DuplicateEntity(String),
    #[error("entity id `{0}` must be nonempty and contain no whitespace")]
    BadEntityId(String),
    #[error("entity `{entity}`: popularity must be positive and finite, got {popularity}")]
    NonPositivePopularity { entity: String, popularity: f64 },
    #[error("entity `{entity}`: unknown attribute `{attribute}`")]
    UnknownAttribute { entity: String, attribute: String },
    #[error("entity `{entity}`: no value for attribute `{attribute}`")]
    MissingAttribute { entity: String, attribute: String },
    #[error("entity `{entity}`: attribute `{attribute}` has no value `{value}`")]
    UnknownValue { entity: String, attribute: String, value: String },
    #[error("entity `{entity}`: attribute `{attribute}` value `{value}` is not a leaf")]
    NonLeafCoordinate { entity: String, attribute: String, value: String },
    #[error("node has {got} coordinates, domain has {expected} attributes")]
    NodeArity { got: usize, expected: usize },
    #[error("node coordinate {index} out of range for attribute `{attribute}`")]
    NodeCoordinate { attribute: String, index: u32 },
    #[error("cannot parse node `{0}`; expected `attr=value;...`")]
    NodeSyntax(String),
}

pub type Result<T, E = DomainError> = std::result::Result<T, E>;

// ---------------------------------------------------------------------------
// File schema

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeSpec {
    pub value: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<NodeSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSpec {
    pub name: String,
    pub root: NodeSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpec {
    pub id: String,
    pub leaf: BTreeMap<String, String>,
    pub popularity: f64,
}

/// On-disk domain description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DomainFile {
    pub attributes: Vec<AttributeSpec>,
    pub entities: Vec<EntitySpec>,
}

// ---------------------------------------------------------------------------
// Hierarchies

/// One attribute's value tree, flattened in pre-order. Index 0 is the root.
#[derive(Debug, Clone)]
pub struct AttributeHierarchy {
    name: String,
    values: Vec<String>,
    parent: Vec<Option<u32>>,
    children: Vec<Vec<u32>>,
    depth: Vec<u32>,
    index: HashMap<String, u32>,
}

impl AttributeHierarchy {
    pub fn from_spec(spec: &AttributeSpec) -> Result<Self> {
        if spec.root.value != WILDCARD {
            return Err(DomainError::RootNotWildcard { attribute: spec.name.clone(), found: spec.root.value.clone() });
        }
        let mut h = AttributeHierarchy {
            name: spec.name.clone(),
            values: Vec::new(),
            parent: Vec::new(),
            children: Vec::new(),
            depth: Vec::new(),
            index: HashMap::new(),
        };
        // Explicit stack keeps deep trees off the call stack.
        let mut stack: Vec<(&NodeSpec, Option<u32>, u32)> = vec![(&spec.root, None, 0)];
        while let Some((node, parent, depth)) = stack.pop() {
            let id = h.values.len() as u32;
            if h.index.insert(node.value.clone(), id).is_some() {
                return Err(DomainError::DuplicateValue { attribute: spec.name.clone(), value: node.value.clone() });
            }
            h.values.push(node.value.clone());
            h.parent.push(parent);
            h.children.push(Vec::new());
            h.depth.push(depth);
            if let Some(p) = parent {
                h.children[p as usize].push(id);
            }
            for child in node.children.iter().rev() {
                stack.push((child, Some(id), depth + 1));
            }
        }
        Ok(h)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn value(&self, v: u32) -> &str {
        &self.values[v as usize]
    }

    pub fn lookup(&self, value: &str) -> Option<u32> {
        self.index.get(value).copied()
    }

    pub fn parent(&self, v: u32) -> Option<u32> {
        self.parent[v as usize]
    }

    pub fn children(&self, v: u32) -> &[u32] {
        &self.children[v as usize]
    }

    pub fn depth(&self, v: u32) -> u32 {
        self.depth[v as usize]
    }

    pub fn is_leaf(&self, v: u32) -> bool {
        self.children[v as usize].is_empty()
    }

    pub fn leaves(&self) -> impl Iterator<Item = u32> + '_ {
        (0..self.values.len() as u32).filter(move |&v| self.is_leaf(v))
    }

    /// True when `anc` equals `v` or lies on the path from `v` to the root.
    pub fn is_ancestor_or_equal(&self, anc: u32, mut v: u32) -> bool {
        let target = self.depth(anc);
        while self.depth(v) > target {
            v = self.parent[v as usize].expect("non-root has a parent");
        }
        v == anc
    }

    fn to_spec_node(&self, v: u32) -> NodeSpec {
        NodeSpec {
            value: self.values[v as usize].clone(),
            children: self.children(v).iter().map(|&c| self.to_spec_node(c)).collect(),
        }
    }

    pub fn to_spec(&self) -> AttributeSpec {
        AttributeSpec { name: self.name.clone(), root: self.to_spec_node(0) }
    }
}

// ---------------------------------------------------------------------------
// Nodes and the poset

/// A poset node: one value index per attribute (0 = wildcard).
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(Box<[u32]>);

impl NodeId {
    pub fn new(coords: Vec<u32>) -> Self {
        NodeId(coords.into_boxed_slice())
    }

    pub fn coords(&self) -> &[u32] {
        &self.0
    }

    /// Stable 64-bit digest used to derive per-node random streams.
    pub fn digest(&self) -> u64 {
        self.0.iter().fold(0x243f_6a88_85a3_08d3u64, |h, &c| splitmix(h ^ u64::from(c)))
    }
}

pub(crate) fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Cross product of the attribute hierarchies.
#[derive(Debug, Clone)]
pub struct DomainPoset {
    hierarchies: Vec<AttributeHierarchy>,
    root: NodeId,
}

impl DomainPoset {
    pub fn new(hierarchies: Vec<AttributeHierarchy>) -> Result<Self> {
        if hierarchies.is_empty() {
            return Err(DomainError::NoAttributes);
        }
        let mut seen = HashSet::new();
        for h in &hierarchies {
            if !seen.insert(h.name.clone()) {
                return Err(DomainError::DuplicateAttribute(h.name.clone()));
            }
        }
        let root = NodeId::new(vec![0; hierarchies.len()]);
        Ok(Self { hierarchies, root })
    }

    pub fn dims(&self) -> usize {
        self.hierarchies.len()
    }

    pub fn hierarchies(&self) -> &[AttributeHierarchy] {
        &self.hierarchies
    }

    pub fn hierarchy(&self, i: usize) -> &AttributeHierarchy {
        &self.hierarchies[i]
    }

    pub fn root(&self) -> &NodeId {
        &self.root
    }

    /// Product of hierarchy sizes. Saturates rather than overflowing.
    pub fn node_count(&self) -> u128 {
        self.hierarchies.iter().fold(1u128, |acc, h| acc.saturating_mul(h.len() as u128))
    }

    pub fn validate(&self, v: &NodeId) -> Result<()> {
        if v.0.len() != self.dims() {
            return Err(DomainError::NodeArity { got: v.0.len(), expected: self.dims() });
        }
        for (h, &c) in self.hierarchies.iter().zip(v.0.iter()) {
            if c as usize >= h.len() {
                return Err(DomainError::NodeCoordinate { attribute: h.name.clone(), index: c });
            }
        }
        Ok(())
    }

    /// Number of non-wildcard coordinates.
    pub fn specificity(&self, v: &NodeId) -> u32 {
        v.0.iter().filter(|&&c| c != 0).count() as u32
    }

    /// Sum of coordinate depths; the root is level 0.
    pub fn level(&self, v: &NodeId) -> u32 {
        v.0.iter().zip(&self.hierarchies).map(|(&c, h)| h.depth(c)).sum()
    }

    pub fn is_leaf(&self, v: &NodeId) -> bool {
        v.0.iter().zip(&self.hierarchies).all(|(&c, h)| h.is_leaf(c))
    }

    /// `u` generalizes (or equals) `v`: every coordinate of `u` is an ancestor-or-equal of `v`'s.
    pub fn generalizes(&self, u: &NodeId, v: &NodeId) -> bool {
        u.0.iter().zip(v.0.iter()).zip(&self.hierarchies).all(|((&a, &b), h)| h.is_ancestor_or_equal(a, b))
    }

    /// Nodes reached by specializing exactly one coordinate by one step.
    pub fn direct_descendants(&self, v: &NodeId) -> Result<Vec<NodeId>> {
        self.validate(v)?;
        let mut out = Vec::new();
        for (i, h) in self.hierarchies.iter().enumerate() {
            for &child in h.children(v.0[i]) {
                let mut coords = v.0.to_vec();
                coords[i] = child;
                out.push(NodeId::new(coords));
            }
        }
        Ok(out)
    }

    /// Nodes reached by generalizing exactly one coordinate by one step.
    pub fn direct_ancestors(&self, v: &NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        for (i, h) in self.hierarchies.iter().enumerate() {
            if let Some(p) = h.parent(v.0[i]) {
                let mut coords = v.0.to_vec();
                coords[i] = p;
                out.push(NodeId::new(coords));
            }
        }
        out
    }

    pub fn contains(&self, v: &NodeId, e: &Entity) -> bool {
        self.generalizes(v, &e.leaf)
    }

    /// Every node whose population includes `e`: the product of the root paths of its coordinates.
    pub fn containing_nodes(&self, e: &Entity) -> Vec<NodeId> {
        let paths: Vec<Vec<u32>> = e
            .leaf
            .0
            .iter()
            .zip(&self.hierarchies)
            .map(|(&c, h)| {
                let mut path = vec![c];
                let mut cur = c;
                while let Some(p) = h.parent(cur) {
                    path.push(p);
                    cur = p;
                }
                path
            })
            .collect();
        let mut out: Vec<Vec<u32>> = vec![Vec::with_capacity(self.dims())];
        for path in &paths {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    path.iter().map(move |&c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(NodeId::new).collect()
    }

    /// Every node of the poset, in lexicographic coordinate order. Only sensible for small domains.
    pub fn all_nodes(&self) -> Vec<NodeId> {
        let mut out: Vec<Vec<u32>> = vec![Vec::new()];
        for h in &self.hierarchies {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..h.len() as u32).map(move |c| {
                        let mut p = prefix.clone();
                        p.push(c);
                        p
                    })
                })
                .collect();
        }
        out.into_iter().map(NodeId::new).collect()
    }

    /// Renders every coordinate as `attr=value`, joined by `;`.
    pub fn format_node(&self, v: &NodeId) -> String {
        v.0.iter()
            .zip(&self.hierarchies)
            .map(|(&c, h)| format!("{}={}", h.name, h.value(c)))
            .collect::<Vec<_>>()
            .join(";")
    }

    /// Parses `attr=value` pairs separated by `,` or `;`; unspecified attributes are wildcards.
    /// The empty string and `*` denote the root.
    pub fn parse_node(&self, text: &str) -> Result<NodeId> {
        let mut coords = vec![0u32; self.dims()];
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed == WILDCARD {
            return Ok(NodeId::new(coords));
        }
        for part in trimmed.split([',', ';']).filter(|p| !p.trim().is_empty()) {
            let (name, value) = part.split_once('=').ok_or_else(|| DomainError::NodeSyntax(text.to_string()))?;
            let (name, value) = (name.trim(), value.trim());
            let i = self
                .hierarchies
                .iter()
                .position(|h| h.name == name)
                .ok_or_else(|| DomainError::NodeSyntax(text.to_string()))?;
            coords[i] = self.hierarchies[i].lookup(value).ok_or_else(|| DomainError::NodeSyntax(text.to_string()))?;
        }
        Ok(NodeId::new(coords))
    }
}

// ---------------------------------------------------------------------------
// Entities

/// Index of an entity inside its catalog.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entity {
    pub id: String,
    pub leaf: NodeId,
    pub popularity: f64,
}

/// Entities of a node together with their summed popularity.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub members: Vec<EntityId>,
    pub mass: f64,
}

impl Population {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

/// Entity table plus a lazily filled per-node population cache.
#[derive(Debug)]
pub struct EntityCatalog {
    entities: Vec<Entity>,
    by_id: HashMap<String, EntityId>,
    populations: RwLock<HashMap<NodeId, Arc<Population>>>,
    fingerprint: u64,
}

impl Clone for EntityCatalog {
    fn clone(&self) -> Self {
        Self {
            entities: self.entities.clone(),
            by_id: self.by_id.clone(),
            populations: RwLock::new(self.populations.read().expect("cache lock").clone()),
            fingerprint: self.fingerprint,
        }
    }
}

impl EntityCatalog {
    pub fn new(entities: Vec<Entity>) -> Result<Self> {
        let mut by_id = HashMap::with_capacity(entities.len());
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        for (i, e) in entities.iter().enumerate() {
            if e.id.is_empty() || e.id.chars().any(char::is_whitespace) {
                return Err(DomainError::BadEntityId(e.id.clone()));
            }
            if !(e.popularity > 0.0 && e.popularity.is_finite()) {
                return Err(DomainError::NonPositivePopularity { entity: e.id.clone(), popularity: e.popularity });
            }
            if by_id.insert(e.id.clone(), EntityId(i as u32)).is_some() {
                return Err(DomainError::DuplicateEntity(e.id.clone()));
            }
            e.id.hash(&mut hasher);
            e.leaf.hash(&mut hasher);
            e.popularity.to_bits().hash(&mut hasher);
        }
        Ok(Self { entities, by_id, populations: RwLock::new(HashMap::new()), fingerprint: hasher.finish() })
    }

    pub fn len(&self) -> usize {
        self.entities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entities.is_empty()
    }

    pub fn get(&self, id: EntityId) -> &Entity {
        &self.entities[id.index()]
    }

    pub fn lookup(&self, name: &str) -> Option<EntityId> {
        self.by_id.get(name).copied()
    }

    pub fn entities(&self) -> &[Entity] {
        &self.entities
    }

    pub fn ids(&self) -> impl Iterator<Item = EntityId> + '_ {
        (0..self.entities.len() as u32).map(EntityId)
    }

    /// Digest of entity ids, leaves and popularities.
    pub fn fingerprint(&self) -> u64 {
        self.fingerprint
    }

    /// Members of `node`, built on first use by filtering a cached parent population.
    pub fn population(&self, poset: &DomainPoset, node: &NodeId) -> Arc<Population> {
        if let Some(p) = self.populations.read().expect("cache lock").get(node) {
            return Arc::clone(p);
        }
        let base: Option<Arc<Population>> = {
            let cache = self.populations.read().expect("cache lock");
            poset.direct_ancestors(node).iter().filter_map(|a| cache.get(a).cloned()).min_by_key(|p| p.len())
        };
        let candidates: Box<dyn Iterator<Item = EntityId>> = match &base {
            Some(p) => Box::new(p.members.iter().copied()),
            None => Box::new(self.ids()),
        };
        let mut members = Vec::new();
        let mut mass = 0.0;
        for id in candidates {
            let e = self.get(id);
            if poset.contains(node, e) {
                members.push(id);
                mass += e.popularity;
            }
        }
        let pop = Arc::new(Population { members, mass });
        self.populations.write().expect("cache lock").entry(node.clone()).or_insert_with(|| Arc::clone(&pop)).clone()
    }

    /// Population by exhaustive scan, bypassing the cache.
    pub fn population_uncached(&self, poset: &DomainPoset, node: &NodeId) -> Population {
        let mut members = Vec::new();
        let mut mass = 0.0;
        for id in self.ids() {
            let e = self.get(id);
            if poset.contains(node, e) {
                members.push(id);
                mass += e.popularity;
            }
        }
        Population { members, mass }
    }

    pub fn cached_nodes(&self) -> Vec<NodeId> {
        let mut v: Vec<NodeId> = self.populations.read().expect("cache lock").keys().cloned().collect();
        v.sort();
        v
    }
}

// ---------------------------------------------------------------------------
// Loading

/// A validated poset with its entity catalog.
#[derive(Debug, Clone)]
pub struct Domain {
    pub poset: DomainPoset,
    pub catalog: EntityCatalog,
}

impl Domain {
    pub fn from_file(file: &DomainFile) -> Result<Self> {
        let hierarchies = file.attributes.iter().map(AttributeHierarchy::from_spec).collect::<Result<Vec<_>>>()?;
        let poset = DomainPoset::new(hierarchies)?;
        let mut entities = Vec::with_capacity(file.entities.len());
        for spec in &file.entities {
            entities.push(resolve_entity(&poset, spec)?);
        }
        let catalog = EntityCatalog::new(entities)?;
        Ok(Self { poset, catalog })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DomainFile = serde_json::from_str(text)?;
        Self::from_file(&file)
    }

    pub fn population(&self, node: &NodeId) -> Arc<Population> {
        self.catalog.population(&self.poset, node)
    }

    pub fn to_file(&self) -> DomainFile {
        let attributes = self.poset.hierarchies().iter().map(|h| h.to_spec()).collect();
        let entities = self
            .catalog
            .entities()
            .iter()
            .map(|e| EntitySpec {
                id: e.id.clone(),
                leaf: e
                    .leaf
                    .coords()
                    .iter()
                    .zip(self.poset.hierarchies())
                    .map(|(&c, h)| (h.name().to_string(), h.value(c).to_string()))
                    .collect(),
                popularity: e.popularity,
            })
            .collect();
        DomainFile { attributes, entities }
    }
}

fn resolve_entity(poset: &DomainPoset, spec: &EntitySpec) -> Result<Entity> {
    for name in spec.leaf.keys() {
        if !poset.hierarchies().iter().any(|h| h.name() == name) {
            return Err(DomainError::UnknownAttribute { entity: spec.id.clone(), attribute: name.clone() });
        }
    }
    let mut coords = Vec::with_capacity(poset.dims());
    for h in poset.hierarchies() {
        let value = spec.leaf.get(h.name()).ok_or_else(|| DomainError::MissingAttribute {
            entity: spec.id.clone(),
            attribute: h.name().to_string(),
        })?;
        let idx = h.lookup(value).ok_or_else(|| DomainError::UnknownValue {
            entity: spec.id.clone(),
            attribute: h.name().to_string(),
            value: value.clone(),
        })?;
        if !h.is_leaf(idx) {
            return Err(DomainError::NonLeafCoordinate {
                entity: spec.id.clone(),
                attribute: h.name().to_string(),
                value: value.clone(),
            });
        }
        coords.push(idx);
    }
    if !(spec.popularity > 0.0 && spec.popularity.is_finite()) {
        return Err(DomainError::NonPositivePopularity { entity: spec.id.clone(), popularity: spec.popularity });
    }
    Ok(Entity { id: spec.id.clone(), leaf: NodeId::new(coords), popularity: spec.popularity })
}

/// Reads and validates a domain file.
pub fn load_domain(path: impl AsRef<Path>) -> Result<Domain> {
    let text = std::fs::read_to_string(path)?;
    Domain::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn leaf(v: &str) -> NodeSpec {
        NodeSpec { value: v.into(), children: vec![] }
    }

    fn inner(v: &str, children: Vec<NodeSpec>) -> NodeSpec {
        NodeSpec { value: v.into(), children }
    }

    fn two_attr_file() -> DomainFile {
        DomainFile {
            attributes: vec![
                AttributeSpec { name: "a".into(), root: inner("*", vec![leaf("a1"), leaf("a2")]) },
                AttributeSpec { name: "b".into(), root: inner("*", vec![leaf("b1"), leaf("b2"), leaf("b3")]) },
            ],
            entities: vec![EntitySpec {
                id: "e".into(),
                leaf: [("a".into(), "a1".into()), ("b".into(), "b2".into())].into(),
                popularity: 1.0,
            }],
        }
    }

    /// Eventbrite-shaped: type (X1, X2), location (* > C1 > {ST1, ST2}), date (* > M1 > {D1, D2}).
    fn event_file() -> DomainFile {
        DomainFile {
            attributes: vec![
                AttributeSpec { name: "type".into(), root: inner("*", vec![leaf("X1"), leaf("X2")]) },
                AttributeSpec {
                    name: "location".into(),
                    root: inner("*", vec![inner("C1", vec![leaf("ST1"), leaf("ST2")])]),
                },
                AttributeSpec {
                    name: "date".into(),
                    root: inner("*", vec![inner("M1", vec![leaf("D1"), leaf("D2")])]),
                },
            ],
            entities: vec![
                EntitySpec {
                    id: "concert".into(),
                    leaf: [
                        ("type".into(), "X1".into()),
                        ("location".into(), "ST2".into()),
                        ("date".into(), "D1".into()),
                    ]
                    .into(),
                    popularity: 3.0,
                },
                EntitySpec {
                    id: "talk".into(),
                    leaf: [
                        ("type".into(), "X2".into()),
                        ("location".into(), "ST1".into()),
                        ("date".into(), "D2".into()),
                    ]
                    .into(),
                    popularity: 2.0,
                },
            ],
        }
    }

    #[test]
    fn root_has_one_step_specializations_per_attribute() {
        let d = Domain::from_file(&two_attr_file()).unwrap();
        let desc = d.poset.direct_descendants(d.poset.root()).unwrap();
        assert_eq!(desc.len(), 5);
    }

    #[test]
    fn leaf_node_has_no_descendants() {
        let d = Domain::from_file(&two_attr_file()).unwrap();
        let e = d.catalog.get(EntityId(0));
        assert!(d.poset.is_leaf(&e.leaf));
        assert!(d.poset.direct_descendants(&e.leaf).unwrap().is_empty());
    }

    #[test]
    fn direct_descendants_match_brute_force_on_event_fixture() {
        let d = Domain::from_file(&event_file()).unwrap();
        let p = &d.poset;
        let x1 = p.parse_node("type=X1").unwrap();
        let got: HashSet<NodeId> = p.direct_descendants(&x1).unwrap().into_iter().collect();
        // Oracle: every node strictly below x1 whose level is exactly one more.
        let want: HashSet<NodeId> = p
            .all_nodes()
            .into_iter()
            .filter(|v| v != &x1 && p.generalizes(&x1, v) && p.level(v) == p.level(&x1) + 1)
            .collect();
        assert_eq!(got, want);
        assert!(got.contains(&p.parse_node("type=X1,location=C1").unwrap()));
        assert!(got.contains(&p.parse_node("type=X1,date=M1").unwrap()));
        assert_eq!(got.len(), 2);
    }

    #[test]
    fn invalid_node_is_rejected() {
        let d = Domain::from_file(&two_attr_file()).unwrap();
        assert!(matches!(d.poset.direct_descendants(&NodeId::new(vec![0])), Err(DomainError::NodeArity { .. })));
        assert!(matches!(
            d.poset.direct_descendants(&NodeId::new(vec![0, 9])),
            Err(DomainError::NodeCoordinate { .. })
        ));
    }

    #[test]
    fn containment_basics() {
        let d = Domain::from_file(&event_file()).unwrap();
        let p = &d.poset;
        let concert = d.catalog.get(EntityId(0));
        assert!(p.contains(p.root(), concert));
        assert!(p.contains(&concert.leaf, concert));
        let sibling = p.parse_node("location=ST1").unwrap();
        assert!(!p.contains(&sibling, concert));
    }

    #[test]
    fn containing_nodes_is_product_of_path_lengths() {
        let d = Domain::from_file(&two_attr_file()).unwrap();
        let e = d.catalog.get(EntityId(0));
        assert_eq!(d.poset.containing_nodes(e).len(), 4);

        let ev = Domain::from_file(&event_file()).unwrap();
        let concert = ev.catalog.get(EntityId(0));
        // depths 1, 2, 2 -> 2 * 3 * 3
        let nodes = ev.poset.containing_nodes(concert);
        assert_eq!(nodes.len(), 18);
        let brute: HashSet<NodeId> =
            ev.poset.all_nodes().into_iter().filter(|v| ev.poset.contains(v, concert)).collect();
        assert_eq!(nodes.into_iter().collect::<HashSet<_>>(), brute);
    }

    #[test]
    fn single_attribute_depth_one_entity_has_two_containing_nodes() {
        let file = DomainFile {
            attributes: vec![AttributeSpec { name: "a".into(), root: inner("*", vec![leaf("x"), leaf("y")]) }],
            entities: vec![
                EntitySpec { id: "e1".into(), leaf: [("a".into(), "x".into())].into(), popularity: 1.0 },
                EntitySpec { id: "e2".into(), leaf: [("a".into(), "y".into())].into(), popularity: 2.0 },
            ],
        };
        let d = Domain::from_file(&file).unwrap();
        assert_eq!(d.catalog.len(), 2);
        assert_eq!(d.poset.containing_nodes(d.catalog.get(EntityId(0))).len(), 2);
    }

    #[test]
    fn zero_popularity_is_rejected() {
        let mut f = two_attr_file();
        f.entities[0].popularity = 0.0;
        assert!(matches!(Domain::from_file(&f), Err(DomainError::NonPositivePopularity { .. })));
    }

    #[test]
    fn inner_value_coordinate_is_rejected_with_attribute_name() {
        let mut f = event_file();
        f.entities[0].leaf.insert("location".into(), "C1".into());
        let err = Domain::from_file(&f).unwrap_err();
        match &err {
            DomainError::NonLeafCoordinate { attribute, .. } => assert_eq!(attribute, "location"),
            other => panic!("unexpected {other:?}"),
        }
        assert!(err.to_string().contains("location"));
    }

    #[test]
    fn duplicate_ids_values_and_bad_roots_are_rejected() {
        let mut f = two_attr_file();
        f.entities.push(f.entities[0].clone());
        assert!(matches!(Domain::from_file(&f), Err(DomainError::DuplicateEntity(_))));

        let mut f = two_attr_file();
        f.attributes[0].root.children.push(leaf("a1"));
        assert!(matches!(Domain::from_file(&f), Err(DomainError::DuplicateValue { .. })));

        let mut f = two_attr_file();
        f.attributes[1].root.value = "all".into();
        assert!(matches!(Domain::from_file(&f), Err(DomainError::RootNotWildcard { .. })));
    }

    #[test]
    fn missing_and_unknown_attributes_are_rejected() {
        let mut f = two_attr_file();
        f.entities[0].leaf.remove("b");
        assert!(matches!(Domain::from_file(&f), Err(DomainError::MissingAttribute { .. })));
        let mut f = two_attr_file();
        f.entities[0].leaf.insert("c".into(), "z".into());
        assert!(matches!(Domain::from_file(&f), Err(DomainError::UnknownAttribute { .. })));
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(Domain::from_json("{\"attributes\": 3}"), Err(DomainError::Parse(_))));
    }

    #[test]
    fn population_cache_agrees_with_scan() {
        let d = Domain::from_file(&event_file()).unwrap();
        for v in d.poset.all_nodes() {
            let cached = d.population(&v);
            let fresh = d.catalog.population_uncached(&d.poset, &v);
            assert_eq!(*cached, fresh, "{}", d.poset.format_node(&v));
        }
        assert_eq!(d.population(d.poset.root()).len(), 2);
        assert!((d.population(d.poset.root()).mass - 5.0).abs() < 1e-12);
    }

    #[test]
    fn file_round_trip_preserves_domain() {
        let d = Domain::from_file(&event_file()).unwrap();
        let again = Domain::from_file(&d.to_file()).unwrap();
        assert_eq!(again.catalog.fingerprint(), d.catalog.fingerprint());
        assert_eq!(again.poset.node_count(), 3 * 4 * 4);
    }

    #[test]
    fn node_text_round_trip() {
        let d = Domain::from_file(&event_file()).unwrap();
        for v in d.poset.all_nodes() {
            let text = d.poset.format_node(&v);
            assert_eq!(d.poset.parse_node(&text).unwrap(), v);
        }
        assert_eq!(&d.poset.parse_node("*").unwrap(), d.poset.root());
        assert!(d.poset.parse_node("nope=1").is_err());
    }
}
