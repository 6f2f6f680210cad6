//! Multicut on complete graphs whose edge costs are inner products of node
//! features.
//!
//! The crate provides the classical greedy additive edge contraction on an
//! explicit graph and four feature-space solvers that simulate it on the
//! implicit complete graph through a sparse, adaptively maintained
//! nearest-neighbour graph:
//!
//! | algorithm  | neighbour maintenance after a merge              |
//! |------------|--------------------------------------------------|
//! | `dgaec`    | exhaustive re-search of every affected node       |
//! | `dgaec-inc`| contraction bound, search only when a list empties |
//! | `dlaec`    | lazy: never search, rebuild when candidates run out |
//! | `dapplaec` | as `dlaec`, initial graph from an approximate index |
//!
//! ```
//! use dense_multicut::{solve, Algorithm, FeatureMatrix, SolverConfig};
//!
//! let fm = FeatureMatrix::from_rows(&[vec![1.0, 0.0], vec![0.9, 0.1], vec![-1.0, 0.0]]).unwrap();
//! let sol = solve(&fm, &SolverConfig::new(Algorithm::DenseGaecInc)).unwrap();
//! assert_eq!(sol.partition.labels(), &[0, 0, 1]);
//! ```

pub mod ann;
pub mod error;
pub mod features;
pub mod forest;
pub mod graph;
pub mod io;
pub mod knn;
pub mod metrics;
pub mod oracle;
pub mod par;
pub mod partition;
pub mod scaling;
pub mod solvers;
pub mod store;
pub mod synth;

pub use error::{Error, Result};
pub use features::{similarity, AlphaSign, FeatureMatrix};
pub use forest::ContractionForest;
pub use graph::{materialize_cost_matrix, SparseWeightedGraph};
pub use knn::{CandidateQueue, Neighbor, NnGraph, UpdateMode};
pub use oracle::enumerate_optimal;
pub use partition::{objective, Instance, Partition};
pub use solvers::{gaec, solve, Algorithm, AnnParams, Merge, Solution, SolverConfig};
pub use store::NodeStore;
