//! Semi-supervised multi-class label propagation on hypergraphs.
//!
//! A hypergraph is built from feature vectors by k-means (one hyperedge per
//! cluster), one of three hypergraph Laplacians is formed, and labels are
//! spread by the propagation iteration or its closed forms. Pairwise kNN
//! graphs provide the baselines.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`hypergraph`] | incidence model, degrees, `L`, `L_sym`, `L_rw`, `S_rw`, `S_sym` |
//! | [`partition`] | k-means and hyperedge construction |
//! | [`graph`] | kNN Gaussian graphs and their Laplacians |
//! | [`solver`] | label matrices, propagation, closed-form solves, prediction |
//! | [`eval`] | confusion counts, sensitivity, comparison tables |
//! | [`pipeline`] | end-to-end runs and parameter sweeps |
//! | [`checks`] | randomized invariant suite |

pub mod checks;
pub mod error;
pub mod eval;
pub mod graph;
pub mod hypergraph;
pub mod io;
pub mod operator;
pub mod partition;
pub mod pipeline;
pub mod solver;
pub mod synthetic;

pub use nalgebra::{DMatrix, DVector};

pub use error::{Error, Result};
pub use eval::{comparison_report, confusion, sensitivity, ComparisonReport, ConfusionCounts};
pub use graph::{graph_laplacian, knn_gaussian_graph, Bandwidth, WeightedGraph};
pub use hypergraph::{
    compute_degrees, laplacian, propagation_matrix, quadratic_form_oracle, DegreeData, Hypergraph,
    LaplacianKind,
};
pub use operator::LinearOperator;
pub use partition::{build_hypergraph, kmeans, ClusterAssignment, FeatureMatrix, WeightingRule};
pub use pipeline::{run, sweep, Dataset, Method, Metrics, RunOutcome, RunSpec, SweepGrid};
pub use solver::{
    initial_labels, predict, propagate_iterative, solve_propagation_closed, solve_sym_regularized,
    solve_unnormalized, EstimateMatrix, LabelMatrix, SolverConfig, SolverMode,
};
