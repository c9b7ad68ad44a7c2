//! Randomized invariant suite over hypergraphs, graphs, and solvers.
//!
//! Each invariant is measured as a non-negative error and compared against
//! a fixed threshold; the report keeps the worst error seen per invariant.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::{graph_laplacian, graph_propagation_matrix, WeightedGraph};
use crate::hypergraph::{
    compute_degrees, laplacian, propagation_matrix, quadratic_form_oracle, Hypergraph,
    LaplacianKind,
};
use crate::solver::{
    initial_labels, propagate_iterative, solve_propagation_closed, solve_sym_regularized,
    solve_unnormalized, SolverConfig, SolverMode,
};
use crate::synthetic::{random_graph, random_hypergraph, random_pair_hypergraph, rng};

pub const QUADRATIC_FORM_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;
pub const NULL_VECTOR_TOL: f64 = 1e-10;
pub const SPECTRUM_TOL: f64 = 1e-8;
pub const GENERALIZED_EIGEN_TOL: f64 = 1e-8;
pub const STOCHASTIC_TOL: f64 = 1e-12;
pub const EIGEN_RANGE_TOL: f64 = 1e-8;
pub const SYMMETRY_TOL: f64 = 1e-12;
pub const GRAPH_REDUCTION_TOL: f64 = 1e-12;
pub const ITERATIVE_CLOSED_TOL: f64 = 1e-6;
pub const REGULARIZATION_TOL: f64 = 1e-8;
pub const SYSTEM_RESIDUAL_TOL: f64 = 1e-10;
pub const LINEARITY_TOL: f64 = 1e-10;
pub const EQUIVARIANCE_TOL: f64 = 1e-12;
/// Relative growth allowed between consecutive late propagation changes.
pub const MONOTONE_SLACK: f64 = 1e-9;

pub const ALPHAS: [f64; 4] = [0.1, 0.5, 0.9, 0.96];
pub const GAMMAS: [f64; 3] = [0.1, 1.0, 10.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantResult {
    pub name: String,
    pub worst_error: f64,
    pub threshold: f64,
    pub evaluations: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub seed: u64,
    pub instances: usize,
    pub results: Vec<InvariantResult>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn get(&self, name: &str) -> Option<&InvariantResult> {
        self.results.iter().find(|r| r.name == name)
    }

    pub fn to_text(&self) -> String {
        let width = self.results.iter().map(|r| r.name.len()).max().unwrap_or(0);
        let mut out = format!(
            "invariant checks: {} instances, seed {}\n",
            self.instances, self.seed
        );
        for r in &self.results {
            let _ = writeln!(
                out,
                "{}  {:<width$}  worst {:.3e}  (threshold {:.0e}, {} evaluations)",
                if r.passed { "PASS" } else { "FAIL" },
                r.name,
                r.worst_error,
                r.threshold,
                r.evaluations,
            );
        }
        out
    }
}

/// Running worst-error record per invariant.
#[derive(Debug, Default)]
pub struct Tally {
    entries: BTreeMap<&'static str, (f64, f64, usize)>,
}

impl Tally {
    pub fn record(&mut self, name: &'static str, error: f64, threshold: f64) {
        // NaN must count as a failure
        let error = if error.is_nan() {
            f64::INFINITY
        } else {
            error.max(0.0)
        };
        let e = self.entries.entry(name).or_insert((0.0, threshold, 0));
        e.0 = e.0.max(error);
        e.2 += 1;
    }

    pub fn into_results(self) -> Vec<InvariantResult> {
        self.entries
            .into_iter()
            .map(|(name, (worst, threshold, evaluations))| InvariantResult {
                name: name.to_string(),
                worst_error: worst,
                threshold,
                evaluations,
                passed: worst <= threshold,
            })
            .collect()
    }
}

/// Every dense operator of one hypergraph. Fields are public so tests can
/// corrupt one and confirm the suite notices.
#[derive(Debug, Clone)]
pub struct HypergraphMatrices {
    pub degree: Vec<f64>,
    pub l: DMatrix<f64>,
    pub l_sym: DMatrix<f64>,
    pub l_rw: DMatrix<f64>,
    pub s_rw: DMatrix<f64>,
    pub s_sym: DMatrix<f64>,
}

impl HypergraphMatrices {
    pub fn new(g: &Hypergraph) -> Self {
        Self {
            degree: compute_degrees(g).vertex,
            l: laplacian(g, LaplacianKind::Unnormalized),
            l_sym: laplacian(g, LaplacianKind::SymmetricNormalized),
            l_rw: laplacian(g, LaplacianKind::RandomWalk),
            s_rw: propagation_matrix(g, LaplacianKind::RandomWalk).expect("normalized kind"),
            s_sym: propagation_matrix(g, LaplacianKind::SymmetricNormalized)
                .expect("normalized kind"),
        }
    }
}

fn asymmetry(m: &DMatrix<f64>) -> f64 {
    (m - m.transpose()).amax()
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// `D^{1/2} M D^{-1/2}`, which maps `L_rw` onto `L_sym` (and `S_rw` onto `S_sym`).
pub fn similarity_transform(m: &DMatrix<f64>, degree: &[f64]) -> DMatrix<f64> {
    let n = m.nrows();
    DMatrix::from_fn(n, n, |u, v| {
        m[(u, v)] * (degree[u].sqrt() / degree[v].sqrt())
    })
}

/// Spectrum of the nonsymmetric `m` read through the similarity transform.
/// The transformed matrix is symmetrized before the symmetric eigensolver;
/// the asymmetry it had is returned alongside.
fn spectrum_via_similarity(m: &DMatrix<f64>, degree: &[f64]) -> (Vec<f64>, f64) {
    let t = similarity_transform(m, degree);
    let skew = asymmetry(&t);
    let sym = (&t + t.transpose()) * 0.5;
    (sorted_eigenvalues(&sym), skew)
}

/// Structural and spectral invariants of one hypergraph's operators.
pub fn check_hypergraph(
    g: &Hypergraph,
    m: &HypergraphMatrices,
    rng: &mut impl Rng,
    tally: &mut Tally,
) {
    let n = g.num_vertices();
    let ones = DVector::from_element(n, 1.0);

    for _ in 0..10 {
        let f: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let fv = DVector::from_column_slice(&f);
        let quad = fv.dot(&(&m.l * &fv));
        let oracle = quadratic_form_oracle(g, &f);
        tally.record(
            "quadratic-form-identity",
            (quad - oracle).abs() / (1.0 + quad.abs()),
            QUADRATIC_FORM_TOL,
        );
    }

    tally.record("symmetry-l", asymmetry(&m.l), SYMMETRY_TOL);
    tally.record("symmetry-l-sym", asymmetry(&m.l_sym), SYMMETRY_TOL);

    let eig_l = sorted_eigenvalues(&m.l);
    let eig_sym = sorted_eigenvalues(&m.l_sym);
    tally.record("psd-l", -eig_l[0], PSD_TOL);
    tally.record("psd-l-sym", -eig_sym[0], PSD_TOL);

    tally.record("null-vector-l", (&m.l * &ones).amax(), NULL_VECTOR_TOL);
    tally.record(
        "null-vector-l-rw",
        (&m.l_rw * &ones).amax(),
        NULL_VECTOR_TOL,
    );
    let sqrt_d = DVector::from_iterator(n, m.degree.iter().map(|d| d.sqrt()));
    tally.record(
        "null-vector-l-sym",
        (&m.l_sym * sqrt_d).amax(),
        NULL_VECTOR_TOL,
    );

    let (eig_rw, skew) = spectrum_via_similarity(&m.l_rw, &m.degree);
    tally.record(
        "similarity-l-rw-to-l-sym",
        skew.max((similarity_transform(&m.l_rw, &m.degree) - &m.l_sym).amax()),
        SYMMETRY_TOL,
    );
    tally.record(
        "spectra-l-sym-vs-l-rw",
        max_diff(&eig_sym, &eig_rw),
        SPECTRUM_TOL,
    );

    // eigenpairs (λ, w) of L_sym give u = D^{-1/2} w with L_rw u = λu and L u = λ D u
    let eigen = SymmetricEigen::new(m.l_sym.clone());
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eigen.eigenvalues[a].total_cmp(&eigen.eigenvalues[b]));
    let d = DVector::from_column_slice(&m.degree);
    for &k in idx.iter().take(3) {
        let lambda = eigen.eigenvalues[k];
        let w = eigen.eigenvectors.column(k);
        let u = DVector::from_iterator(n, w.iter().zip(&m.degree).map(|(wi, di)| wi / di.sqrt()));
        let gen = &m.l * &u - (u.component_mul(&d)) * lambda;
        tally.record(
            "generalized-eigenproblem",
            gen.amax(),
            GENERALIZED_EIGEN_TOL,
        );
        let rw = &m.l_rw * &u - &u * lambda;
        tally.record("l-rw-eigenpairs", rw.amax(), GENERALIZED_EIGEN_TOL);
    }

    let row_err = m
        .s_rw
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    tally.record("stochastic-rows-s-rw", row_err, STOCHASTIC_TOL);
    tally.record("nonnegative-s-rw", -m.s_rw.min(), STOCHASTIC_TOL);

    let eye = DMatrix::identity(n, n);
    tally.record(
        "propagation-is-identity-minus-laplacian",
        (&m.s_rw - (&eye - &m.l_rw))
            .amax()
            .max((&m.s_sym - (&eye - &m.l_sym)).amax()),
        SYMMETRY_TOL,
    );

    let eig_ssym = sorted_eigenvalues(&m.s_sym);
    let (eig_srw, _) = spectrum_via_similarity(&m.s_rw, &m.degree);
    let outside = |eigs: &[f64]| {
        eigs.iter()
            .map(|l| l.abs() - 1.0)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    tally.record("eigen-range-s-sym", outside(&eig_ssym), EIGEN_RANGE_TOL);
    tally.record("eigen-range-s-rw", outside(&eig_srw), EIGEN_RANGE_TOL);
}

/// Random `n × c` label matrix with a random non-empty labeled subset.
pub fn random_labels(rng: &mut impl Rng, n: usize, c: usize) -> DMatrix<f64> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let l = rng.random_range(1..=n);
    let pairs: Vec<(usize, usize)> = idx[..l]
        .iter()
        .map(|&i| (i, rng.random_range(0..c)))
        .collect();
    let y = initial_labels(&pairs, n, c).expect("valid labels");
    // undo the labeled-prefix reordering so labels land on the chosen samples
    y.to_original_rows(y.values())
}

/// Invariant names for one family of solver checks.
#[derive(Debug, Clone, Copy)]
pub struct SolverCheckNames {
    pub iterative_closed: &'static str,
    pub monotone: &'static str,
    pub rate: &'static str,
    pub regularization: &'static str,
    pub residual: &'static str,
    pub linearity: &'static str,
    pub equivariance: &'static str,
    /// Gap between the compared changes in the monotonicity check. A graph
    /// `S` may have eigenvalue -1 (bipartite graphs), making the max-abs
    /// change alternate forever, so graphs compare every other iterate.
    /// Hypergraph `S` is positive semidefinite and uses 1.
    pub monotone_stride: usize,
}

pub const HYPERGRAPH_SOLVER_CHECKS: SolverCheckNames = SolverCheckNames {
    iterative_closed: "iterative-matches-closed-form",
    monotone: "monotone-late-changes",
    rate: "iterations-grow-with-alpha",
    regularization: "regularization-equivalence",
    residual: "unnormalized-system-residual",
    linearity: "linearity",
    equivariance: "label-permutation-equivariance",
    monotone_stride: 1,
};

pub const GRAPH_SOLVER_CHECKS: SolverCheckNames = SolverCheckNames {
    iterative_closed: "graph-iterative-matches-closed-form",
    monotone: "graph-monotone-late-changes",
    rate: "graph-iterations-grow-with-alpha",
    regularization: "graph-regularization-equivalence",
    residual: "graph-unnormalized-system-residual",
    linearity: "graph-linearity",
    equivariance: "graph-label-permutation-equivariance",
    monotone_stride: 2,
};

/// Solver equivalences on one set of operators.
pub fn check_solvers(
    names: &SolverCheckNames,
    l: &DMatrix<f64>,
    l_sym: &DMatrix<f64>,
    s_rw: &DMatrix<f64>,
    s_sym: &DMatrix<f64>,
    rng: &mut impl Rng,
    tally: &mut Tally,
) {
    let n = l.nrows();
    let c = 3;
    let y = random_labels(rng, n, c);
    let y2 = random_labels(rng, n, c);

    for &alpha in &ALPHAS {
        let cfg = SolverConfig {
            alpha,
            mode: SolverMode::Iterative,
            ..SolverConfig::default()
        };
        for s in [s_rw, s_sym] {
            let it = propagate_iterative(s, &y, &cfg).expect("valid config");
            let closed = solve_propagation_closed(s, &y, alpha).expect("nonsingular");
            let err = if it.converged {
                (&it.values - &closed.values).amax()
            } else {
                f64::INFINITY
            };
            tally.record(names.iterative_closed, err, ITERATIVE_CLOSED_TOL);

            let stride = names.monotone_stride;
            let tail = &it.change_history[it.change_history.len().saturating_sub(10)..];
            let growth = tail
                .windows(stride + 1)
                .map(|w| (w[stride] - w[0]) / w[0].max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            tally.record(names.monotone, growth, MONOTONE_SLACK);
        }
    }

    let slow = SolverConfig {
        alpha: 0.96,
        mode: SolverMode::Iterative,
        ..SolverConfig::default()
    };
    let fast = SolverConfig { alpha: 0.5, ..slow };
    let it_slow = propagate_iterative(s_sym, &y, &slow)
        .expect("valid config")
        .iterations;
    let it_fast = propagate_iterative(s_sym, &y, &fast)
        .expect("valid config")
        .iterations;
    // When S acts as a projection on Y's span (e.g. one hyperedge covering
    // every vertex) both runs stop after two steps; otherwise α = 0.5 must
    // finish strictly sooner.
    let violated = it_fast > it_slow || (it_slow > 2 && it_fast == it_slow);
    tally.record(names.rate, if violated { 1.0 } else { 0.0 }, 0.0);

    for &gamma in &GAMMAS {
        let alpha = 1.0 / (1.0 + gamma);
        let reg = solve_sym_regularized(l_sym, &y, gamma).expect("SPD");
        let prop = solve_propagation_closed(s_sym, &y, alpha).expect("nonsingular");
        tally.record(
            names.regularization,
            (&reg.values - &prop.values).amax(),
            REGULARIZATION_TOL,
        );

        let un = solve_unnormalized(l, &y, gamma).expect("SPD");
        let system = l + DMatrix::identity(n, n) * gamma;
        tally.record(
            names.residual,
            (system * &un.values - &y * gamma).amax(),
            SYSTEM_RESIDUAL_TOL,
        );

        let sum = solve_unnormalized(l, &(&y + &y2), gamma)
            .expect("SPD")
            .values;
        let parts = un.values.clone() + solve_unnormalized(l, &y2, gamma).expect("SPD").values;
        tally.record(names.linearity, (sum - parts).amax(), LINEARITY_TOL);
    }

    let sum = solve_propagation_closed(s_rw, &(&y + &y2), 0.9)
        .expect("nonsingular")
        .values;
    let parts = solve_propagation_closed(s_rw, &y, 0.9)
        .expect("nonsingular")
        .values
        + solve_propagation_closed(s_rw, &y2, 0.9)
            .expect("nonsingular")
            .values;
    tally.record(names.linearity, (sum - parts).amax(), LINEARITY_TOL);

    let perm = [2usize, 0, 1];
    let y_perm = DMatrix::from_fn(n, c, |i, j| y[(i, perm[j])]);
    let f = solve_propagation_closed(s_sym, &y, 0.96)
        .expect("nonsingular")
        .values;
    let f_perm = solve_propagation_closed(s_sym, &y_perm, 0.96)
        .expect("nonsingular")
        .values;
    let expected = DMatrix::from_fn(n, c, |i, j| f[(i, perm[j])]);
    tally.record(
        names.equivariance,
        (f_perm - expected).amax(),
        EQUIVARIANCE_TOL,
    );
}

/// Spectral invariants of a pairwise graph's Laplacians.
pub fn check_graph(g: &WeightedGraph, tally: &mut Tally) {
    let n = g.num_vertices();
    let ones = DVector::from_element(n, 1.0);
    let l = graph_laplacian(g, LaplacianKind::Unnormalized);
    let l_sym = graph_laplacian(g, LaplacianKind::SymmetricNormalized);
    let l_rw = graph_laplacian(g, LaplacianKind::RandomWalk);
    let s_rw = graph_propagation_matrix(g, LaplacianKind::RandomWalk).expect("normalized kind");

    tally.record("graph-psd-l", -sorted_eigenvalues(&l)[0], PSD_TOL);
    let eig_sym = sorted_eigenvalues(&l_sym);
    tally.record("graph-psd-l-sym", -eig_sym[0], PSD_TOL);
    tally.record("graph-null-vector-l", (&l * &ones).amax(), NULL_VECTOR_TOL);
    tally.record(
        "graph-null-vector-l-rw",
        (&l_rw * &ones).amax(),
        NULL_VECTOR_TOL,
    );
    let row_err = s_rw
        .row_iter()
        .map(|r| (r.sum() - 1.0).abs())
        .fold(0.0, f64::max);
    tally.record("graph-stochastic-rows", row_err, STOCHASTIC_TOL);
    let (eig_rw, _) = spectrum_via_similarity(&l_rw, g.degrees());
    tally.record(
        "graph-spectra-l-sym-vs-l-rw",
        max_diff(&eig_sym, &eig_rw),
        SPECTRUM_TOL,
    );
}

/// Hypergraph of vertex pairs versus half the graph Laplacian on the same pairs.
pub fn check_graph_reduction(rng: &mut impl Rng, tally: &mut Tally) {
    let (h, pairs) = random_pair_hypergraph(rng, 20, 5.0);
    let g = WeightedGraph::from_edges(h.num_vertices(), &pairs).expect("connected by construction");
    let lh = laplacian(&h, LaplacianKind::Unnormalized);
    let lg = graph_laplacian(&g, LaplacianKind::Unnormalized);
    tally.record(
        "graph-reduction",
        (lh - lg * 0.5).amax(),
        GRAPH_REDUCTION_TOL,
    );
}

/// Runs every invariant over `instances` random hypergraphs (n ≤ 20, m ≤ 8,
/// weights in (0, 5]), as many pair hypergraphs, and as many random graphs.
pub fn run_checks(instances: usize, seed: u64) -> CheckReport {
    let mut rng = rng(seed);
    let mut tally = Tally::default();
    for _ in 0..instances {
        let g = random_hypergraph(&mut rng, 20, 8, 5.0);
        let m = HypergraphMatrices::new(&g);
        check_hypergraph(&g, &m, &mut rng, &mut tally);
        check_solvers(
            &HYPERGRAPH_SOLVER_CHECKS,
            &m.l,
            &m.l_sym,
            &m.s_rw,
            &m.s_sym,
            &mut rng,
            &mut tally,
        );

        check_graph_reduction(&mut rng, &mut tally);

        let graph = random_graph(&mut rng, 20, 5.0);
        check_graph(&graph, &mut tally);
        let l = graph_laplacian(&graph, LaplacianKind::Unnormalized);
        let l_sym = graph_laplacian(&graph, LaplacianKind::SymmetricNormalized);
        let s_rw =
            graph_propagation_matrix(&graph, LaplacianKind::RandomWalk).expect("normalized kind");
        let s_sym = graph_propagation_matrix(&graph, LaplacianKind::SymmetricNormalized)
            .expect("normalized kind");
        check_solvers(
            &GRAPH_SOLVER_CHECKS,
            &l,
            &l_sym,
            &s_rw,
            &s_sym,
            &mut rng,
            &mut tally,
        );
    }
    CheckReport {
        seed,
        instances,
        results: tally.into_results(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_instances_pass() {
        let report = run_checks(5, 1);
        assert!(report.passed(), "{}", report.to_text());
        assert!(report.get("quadratic-form-identity").is_some());
        assert!(report.get("graph-reduction").is_some());
    }

    #[test]
    fn corrupted_laplacian_is_detected() {
        let mut r = rng(3);
        let g = random_hypergraph(&mut r, 10, 4, 5.0);
        let mut m = HypergraphMatrices::new(&g);
        m.l[(0, 0)] += 1e-3;
        let mut tally = Tally::default();
        check_hypergraph(&g, &m, &mut r, &mut tally);
        let results = tally.into_results();
        let failed: Vec<&str> = results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| r.name.as_str())
            .collect();
        assert!(failed.contains(&"null-vector-l"), "{failed:?}");
        assert!(failed.contains(&"quadratic-form-identity"), "{failed:?}");
    }

    #[test]
    fn nan_counts_as_failure() {
        let mut t = Tally::default();
        t.record("x", f64::NAN, 1.0);
        assert!(!t.into_results()[0].passed);
    }
}
