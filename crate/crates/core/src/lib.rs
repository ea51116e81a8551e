//! Budgeted entity extraction from a simulated crowd over a hierarchical domain.
//!
//! A domain is the product of attribute hierarchies; every node of that
//! poset has a population of entities. Queries `q(k, E)` at a node return up
//! to `k` popularity-weighted entities outside the exclude list `E`. The
//! policies in [`policy`] decide where and how to query so that the number of
//! distinct entities extracted within a monetary budget is as large as
//! possible, using the gain estimators in [`estimators`].
//!
//! The estimator formulas, fits and cost model are generic over [`Real`]
//! (`f32` or `f64`); the aliases below fix the scalar to `f64`, which is what
//! the simulation layer uses.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod estimators;
pub mod harness;
pub mod numerics;
pub mod oracle;
pub mod policy;
pub mod sample;
pub mod scalar;

pub use domain::{load_domain, Domain, DomainError, DomainFile, DomainPoset, Entity, EntityCatalog, EntityId, NodeId};
pub use estimators::{EstimatorConfig, EstimatorError, GainMethod};
pub use oracle::{CrowdOracle, OracleError, Query, QueryResponse};
pub use policy::{
    run_policy, simulate, Elimination, Policy, PolicyError, PolicySettings, Pruned, QueryConfig, Run, Transcript,
};
pub use sample::{ExtractionLedger, FrequencyStats, NodeState, SampleStore};
pub use scalar::Real;

pub type GainEstimate = estimators::GainEstimate<f64>;
pub type KModel = estimators::KModel<f64>;
pub type CostModel = policy::CostModel<f64>;
pub type Band = policy::Band<f64>;
pub type ParamBox = numerics::ParamBox<f64>;
pub type FitResult = numerics::FitResult<f64>;
pub type SimplexOptions = numerics::SimplexOptions<f64>;
