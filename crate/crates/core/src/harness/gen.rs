//! Synthetic sparse domains.

use super::HarnessError;
use crate::domain::{AttributeSpec, DomainFile, EntitySpec, NodeSpec, WILDCARD};
use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// A complete tree: every internal value has `branching` children, down to `depth`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeShape {
    pub branching: u32,
    pub depth: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "lowercase")]
pub enum PopularityLaw {
    /// Independent draws from `(0, 10]`.
    Uniform,
    /// `10 / r^s` for a random permutation of ranks `r = 1..=N`.
    Zipf { s: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub attributes: Vec<TreeShape>,
    pub entities: u32,
    /// Share of poset leaves that receive entities.
    pub populated_fraction: f64,
    pub popularity: PopularityLaw,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Three attributes (3/4/5-ary, depths 2/2/1), 5,000 Zipf(1) entities on 15% of the leaves.
    pub fn standard(seed: u64) -> Self {
        Self {
            attributes: vec![
                TreeShape { branching: 3, depth: 2 },
                TreeShape { branching: 4, depth: 2 },
                TreeShape { branching: 5, depth: 1 },
            ],
            entities: 5000,
            populated_fraction: 0.15,
            popularity: PopularityLaw::Zipf { s: 1.0 },
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Spec(m.to_string()));
        if self.attributes.is_empty() {
            return bad("at least one attribute is required");
        }
        if self.attributes.iter().any(|a| a.branching == 0 || a.depth == 0) {
            return bad("branching and depth must be at least 1");
        }
        if !(self.populated_fraction > 0.0 && self.populated_fraction <= 1.0) {
            return bad("populated fraction must lie in (0, 1]");
        }
        if let PopularityLaw::Zipf { s } = self.popularity {
            if !(s > 0.0 && s.is_finite()) {
                return bad("Zipf exponent must be positive");
            }
        }
        if self.leaf_count() > u32::MAX as u128 {
            return bad("too many leaves");
        }
        Ok(())
    }

    pub fn leaf_count(&self) -> u128 {
        self.attributes.iter().map(|a| (a.branching as u128).pow(a.depth)).product()
    }

    /// Number of leaves that receive entities: `round(fraction * leaves)`, at least one.
    pub fn populated_leaves(&self) -> usize {
        ((self.populated_fraction * self.leaf_count() as f64).round() as usize).max(1)
    }

    pub fn generate(&self) -> Result<DomainFile, HarnessError> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let names: Vec<String> = (0..self.attributes.len()).map(attribute_name).collect();
        let attributes: Vec<AttributeSpec> = self
            .attributes
            .iter()
            .zip(&names)
            .map(|(shape, name)| AttributeSpec {
                name: name.clone(),
                root: NodeSpec { value: WILDCARD.into(), children: subtree(name, "", *shape, 1) },
            })
            .collect();
        let leaf_values: Vec<Vec<String>> = attributes
            .iter()
            .map(|a| {
                let mut out = Vec::new();
                collect_leaves(&a.root, &mut out);
                out
            })
            .collect();

        let total = self.leaf_count() as usize;
        let populated: Vec<usize> = index::sample(&mut rng, total, self.populated_leaves()).into_vec();
        let popularity = self.popularities(&mut rng);
        let entities = (0..self.entities as usize)
            .map(|i| {
                let mut cell = *populated.choose(&mut rng).expect("at least one populated leaf");
                let mut leaf = BTreeMap::new();
                // Mixed-radix decode, last attribute fastest.
                for (a, values) in leaf_values.iter().enumerate().rev() {
                    leaf.insert(names[a].clone(), values[cell % values.len()].clone());
                    cell /= values.len();
                }
                EntitySpec { id: format!("e{i}"), leaf, popularity: popularity[i] }
            })
            .collect();
        Ok(DomainFile { attributes, entities })
    }

    fn popularities(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let n = self.entities as usize;
        match self.popularity {
            PopularityLaw::Uniform => (0..n).map(|_| 10.0 * (1.0 - rng.gen::<f64>())).collect(),
            PopularityLaw::Zipf { s } => {
                let mut ranks: Vec<usize> = (1..=n).collect();
                ranks.shuffle(rng);
                ranks.into_iter().map(|r| 10.0 / (r as f64).powf(s)).collect()
            }
        }
    }
}

fn attribute_name(i: usize) -> String {
    // A, B, ..., Z, A1, B1, ...
    let letter = (b'A' + (i % 26) as u8) as char;
    match i / 26 {
        0 => letter.to_string(),
        r => format!("{letter}{r}"),
    }
}

fn subtree(attr: &str, prefix: &str, shape: TreeShape, level: u32) -> Vec<NodeSpec> {
    if level > shape.depth {
        return Vec::new();
    }
    (1..=shape.branching)
        .map(|c| {
            let label = if prefix.is_empty() { format!("{}{c}", attr.to_lowercase()) } else { format!("{prefix}.{c}") };
            NodeSpec { children: subtree(attr, &label, shape, level + 1), value: label }
        })
        .collect()
}

fn collect_leaves(node: &NodeSpec, out: &mut Vec<String>) {
    if node.children.is_empty() {
        out.push(node.value.clone());
    }
    for c in &node.children {
        collect_leaves(c, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::Domain;
    use std::collections::HashSet;

    #[test]
    fn tiny_spec_loads() {
        let spec = GeneratorSpec {
            attributes: vec![TreeShape { branching: 2, depth: 1 }],
            entities: 4,
            populated_fraction: 1.0,
            popularity: PopularityLaw::Uniform,
            seed: 3,
        };
        let d = Domain::from_file(&spec.generate().unwrap()).unwrap();
        assert_eq!(d.catalog.len(), 4);
        assert_eq!(d.poset.hierarchy(0).leaves().count(), 2);
    }

    #[test]
    fn sparse_fraction_leaves_most_leaves_empty() {
        let mut spec = GeneratorSpec::standard(1);
        spec.populated_fraction = 0.1;
        let file = spec.generate().unwrap();
        let used: HashSet<_> = file.entities.iter().map(|e| e.leaf.clone()).collect();
        let leaves = spec.leaf_count() as usize;
        assert_eq!(leaves, 720);
        assert!(used.len() <= spec.populated_leaves());
        assert!((leaves - used.len()) as f64 >= 0.9 * leaves as f64 - 1.0);
    }

    #[test]
    fn uniform_popularities_in_range() {
        let mut spec = GeneratorSpec::standard(2);
        spec.popularity = PopularityLaw::Uniform;
        let file = spec.generate().unwrap();
        assert!(file.entities.iter().all(|e| e.popularity > 0.0 && e.popularity <= 10.0));
    }

    #[test]
    fn zipf_popularities_are_a_rank_permutation() {
        let file = GeneratorSpec::standard(4).generate().unwrap();
        let mut p: Vec<f64> = file.entities.iter().map(|e| e.popularity).collect();
        p.sort_by(|a, b| b.total_cmp(a));
        assert_eq!(p[0], 10.0);
        assert!((p[1] - 5.0).abs() < 1e-12);
        assert!((p[4999] - 10.0 / 5000.0).abs() < 1e-12);
    }

    #[test]
    fn generation_is_seeded() {
        let a = GeneratorSpec::standard(9).generate().unwrap();
        let b = GeneratorSpec::standard(9).generate().unwrap();
        let c = GeneratorSpec::standard(10).generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut spec = GeneratorSpec::standard(1);
        spec.populated_fraction = 0.0;
        assert!(spec.generate().is_err());
        let mut spec = GeneratorSpec::standard(1);
        spec.attributes[0].depth = 0;
        assert!(spec.validate().is_err());
        let mut spec = GeneratorSpec::standard(1);
        spec.popularity = PopularityLaw::Zipf { s: -1.0 };
        assert!(spec.validate().is_err());
    }
}
