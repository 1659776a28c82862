//! Weighted p-median solvers for placing bicycle-sharing stations.
//!
//! The crate is organised bottom-up:
//!
//! * [`instance`] - customers, candidate sites, weight models, file ingestion and
//!   the synthetic city generator.
//! * [`distances`] - customer x site distance matrices (planar Euclidean or
//!   street-graph shortest paths) and their binary cache.
//! * [`evaluation`] - the weighted p-median objective and incremental
//!   nearest/second-nearest bookkeeping for O(N) swap moves.
//! * [`neighborhood`] - NEAR / QUAD domain models and the shake operators.
//! * [`local_search`] - FI, IALT and IMP descent procedures.
//! * [`metaheuristics`] - GA, ILS, PSO, SA and VNS plus their configuration format.
//! * [`statistics`] - run summaries, improvement ECDFs and the Wilcoxon rank-sum test.
//!
//! Everything that touches distances or weights is generic over a [`Scalar`]
//! (`f32` or `f64`). The aliases at the crate root fix the scalar to `f64`,
//! which is what the CLI and the experiment harness use.

pub mod distances;
pub mod error;
pub mod evaluation;
pub mod instance;
pub mod local_search;
pub mod metaheuristics;
pub mod neighborhood;
pub mod scalar;
pub mod statistics;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Instance = instance::Instance<f64>;
pub type InstanceF32 = instance::Instance<f32>;
pub type DistanceMatrix = distances::DistanceMatrix<f64>;
pub type DistanceMatrixF32 = distances::DistanceMatrix<f32>;
pub type WeightModel = instance::WeightModel<f64>;
pub type WeightModelF32 = instance::WeightModel<f32>;
pub type AssignmentState<'a> = evaluation::AssignmentState<'a, f64>;
pub type AssignmentStateF32<'a> = evaluation::AssignmentState<'a, f32>;
pub type RunResult = metaheuristics::RunResult<f64>;
pub type RunResultF32 = metaheuristics::RunResult<f32>;

pub use evaluation::Solution;
pub use instance::{DistanceKind, WeightKind};
pub use metaheuristics::AlgorithmConfig;
