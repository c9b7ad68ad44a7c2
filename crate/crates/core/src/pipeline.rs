//! End-to-end runs: structure construction, solve, predict, evaluate.
//!
//! Samples are reordered so labeled ones come first (see
//! [`initial_labels`]); everything downstream works in that order and
//! results are mapped back to the original sample indices at the end.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{
    confusion, sensitivity, ComparisonReport, ConfusionCounts, ReportRow, Sensitivity,
};
use crate::graph::{
    graph_laplacian, graph_propagation_matrix, knn_gaussian_graph, Bandwidth, GraphOperator,
};
use crate::hypergraph::{
    laplacian, propagation_matrix, HypergraphOperator, LaplacianKind, OperatorKind,
};
use crate::operator::LinearOperator;
use crate::partition::{build_hypergraph, kmeans, FeatureMatrix, WeightingRule};
use crate::solver::{
    initial_labels, predict, propagate_iterative, solve_propagation_closed,
    solve_propagation_krylov, solve_shifted_krylov, solve_unnormalized, EstimateMatrix, Prediction,
    SolveMethod, SolverConfig, SolverMode,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    GraphUnnorm,
    GraphRw,
    GraphSym,
    HyperUnnorm,
    HyperRw,
    HyperSym,
}

impl Method {
    /// Graph baselines first, then the hypergraph methods.
    pub const ALL: [Method; 6] = [
        Method::GraphUnnorm,
        Method::GraphRw,
        Method::GraphSym,
        Method::HyperUnnorm,
        Method::HyperRw,
        Method::HyperSym,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::GraphUnnorm => "graph-unnorm",
            Method::GraphRw => "graph-rw",
            Method::GraphSym => "graph-sym",
            Method::HyperUnnorm => "hyper-unnorm",
            Method::HyperRw => "hyper-rw",
            Method::HyperSym => "hyper-sym",
        }
    }

    pub fn is_hypergraph(self) -> bool {
        matches!(
            self,
            Method::HyperUnnorm | Method::HyperRw | Method::HyperSym
        )
    }

    pub fn kind(self) -> LaplacianKind {
        match self {
            Method::GraphUnnorm | Method::HyperUnnorm => LaplacianKind::Unnormalized,
            Method::GraphRw | Method::HyperRw => LaplacianKind::RandomWalk,
            Method::GraphSym | Method::HyperSym => LaplacianKind::SymmetricNormalized,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::param("method", format!("unknown method `{s}`")))
    }
}

/// Every free parameter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub method: Method,
    pub solver: SolverConfig,
    /// k-means cluster count (hypergraph methods).
    pub clusters: usize,
    pub kmeans_max_iter: usize,
    pub weighting: WeightingRule,
    /// Neighbour count (graph methods).
    pub knn: usize,
    pub bandwidth: Bandwidth,
    pub seed: u64,
    /// Largest `n` for which operators are materialized densely.
    pub dense_cap: usize,
    /// Class count; inferred from labels and truth when absent.
    pub classes: Option<usize>,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            method: Method::HyperSym,
            solver: SolverConfig::default(),
            clusters: 250,
            kmeans_max_iter: 300,
            weighting: WeightingRule::Unit,
            knn: 10,
            bandwidth: Bandwidth::Auto,
            seed: 0,
            dense_cap: 10_000,
            classes: None,
        }
    }
}

impl RunSpec {
    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.method.is_hypergraph() {
            if self.clusters < 2 {
                return Err(Error::param("clusters", "must be at least 2"));
            }
            if self.kmeans_max_iter == 0 {
                return Err(Error::param("kmeans-max-iter", "must be positive"));
            }
        } else {
            if self.knn == 0 {
                return Err(Error::param("knn", "must be positive"));
            }
            if let Bandwidth::Fixed(s) = self.bandwidth {
                if !(s.is_finite() && s > 0.0) {
                    return Err(Error::param("bandwidth", format!("{s} must be positive")));
                }
            }
        }
        if self.classes == Some(0) {
            return Err(Error::param("classes", "must be positive"));
        }
        Ok(())
    }
}

/// In-memory inputs of a run.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub features: FeatureMatrix,
    pub labels: Vec<(usize, usize)>,
    /// Samples to score, with their true classes.
    pub truth: Option<Vec<(usize, usize)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StructureSummary {
    Hypergraph {
        requested_clusters: usize,
        clusters: usize,
        dissolved: usize,
        kmeans_iterations: usize,
        inertia: f64,
    },
    Graph {
        edges: usize,
        bandwidth: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSummary {
    pub method: SolveMethod,
    pub matrix_free: bool,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataSummary {
    pub samples: usize,
    pub features: usize,
    pub classes: usize,
    pub labeled: usize,
    pub scored: usize,
    pub zero_confidence: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub sensitivity: Option<Sensitivity>,
    pub counts: ConfusionCounts,
}

/// Everything a run reports, excluding wall-clock timing so that identical
/// inputs produce identical metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub config: RunSpec,
    pub data: DataSummary,
    pub structure: StructureSummary,
    pub solver: SolverSummary,
    pub evaluation: Option<Evaluation>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub structure_ms: f64,
    pub solve_ms: f64,
    pub total_ms: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    /// `F` in original sample order.
    pub estimates: DMatrix<f64>,
    pub prediction: Prediction,
    pub metrics: Metrics,
    pub timing: Timing,
}

impl RunOutcome {
    pub fn converged(&self) -> bool {
        self.metrics.solver.converged
    }

    pub fn micro_q(&self) -> Option<f64> {
        self.metrics
            .evaluation
            .as_ref()
            .and_then(|e| e.sensitivity.as_ref())
            .map(|s| s.micro)
    }
}

fn infer_classes(data: &Dataset, explicit: Option<usize>) -> Result<usize> {
    let max_seen = data
        .labels
        .iter()
        .chain(data.truth.iter().flatten())
        .map(|&(_, c)| c)
        .max();
    match (explicit, max_seen) {
        (Some(c), Some(m)) if m >= c => Err(Error::InvalidInput(format!(
            "class index {m} out of range for {c} classes"
        ))),
        (Some(c), _) => Ok(c),
        (None, Some(m)) => Ok(m + 1),
        (None, None) => Ok(1),
    }
}

fn ms(since: Instant) -> f64 {
    since.elapsed().as_secs_f64() * 1e3
}

fn solve_with<A: LinearOperator + ?Sized>(
    kind: LaplacianKind,
    mode: SolverMode,
    cfg: &SolverConfig,
    y: &DMatrix<f64>,
    dense: Option<&DMatrix<f64>>,
    op: &A,
) -> Result<EstimateMatrix> {
    match (kind, mode, dense) {
        (LaplacianKind::Unnormalized, _, Some(l)) => solve_unnormalized(l, y, cfg.gamma),
        (LaplacianKind::Unnormalized, _, None) => solve_shifted_krylov(op, y, cfg.gamma),
        (_, SolverMode::Iterative, _) => propagate_iterative(op, y, cfg),
        (_, SolverMode::ClosedForm, Some(s)) => solve_propagation_closed(s, y, cfg.alpha),
        (_, SolverMode::ClosedForm, None) => solve_propagation_krylov(op, y, cfg.alpha),
    }
}

/// Runs one method on one dataset.
pub fn run(spec: &RunSpec, data: &Dataset) -> Result<RunOutcome> {
    let start = Instant::now();
    spec.validate()?;
    let n = data.features.rows();
    let c = infer_classes(data, spec.classes)?;
    let labels = initial_labels(&data.labels, n, c)?;
    let x = data.features.permuted(labels.order());
    let y = labels.values();
    let kind = spec.method.kind();
    let mode = spec.solver.mode;
    // iterative propagation only needs products, which are O(nnz) matrix-free
    let materialize = n <= spec.dense_cap
        && !(mode == SolverMode::Iterative && kind != LaplacianKind::Unnormalized);
    let mut warnings = Vec::new();
    if labels.labeled() == 0 {
        warnings.push(
            "no labeled samples: every estimate is zero and every prediction zero-confidence"
                .into(),
        );
    }
    if kind == LaplacianKind::Unnormalized && mode == SolverMode::Iterative {
        warnings.push(
            "the un-normalized method has no propagation iteration; solved in closed form".into(),
        );
    }

    let structure_start = Instant::now();
    let (structure, estimate, structure_ms);
    let solve_start;
    if spec.method.is_hypergraph() {
        let clusters = kmeans(&x, spec.clusters, spec.seed, spec.kmeans_max_iter)?;
        if clusters.dissolved > 0 {
            warnings.push(format!(
                "{} of {} clusters had fewer than 2 members and were dissolved",
                clusters.dissolved, clusters.requested_k
            ));
        }
        let g = build_hypergraph(&clusters, spec.weighting)?;
        structure = StructureSummary::Hypergraph {
            requested_clusters: clusters.requested_k,
            clusters: clusters.k,
            dissolved: clusters.dissolved,
            kmeans_iterations: clusters.iterations,
            inertia: clusters.inertia,
        };
        let op_kind = match kind {
            LaplacianKind::Unnormalized => OperatorKind::Laplacian(kind),
            _ => OperatorKind::Propagation(kind),
        };
        let op = HypergraphOperator::new(&g, op_kind)?;
        let dense = if materialize {
            Some(match kind {
                LaplacianKind::Unnormalized => laplacian(&g, kind),
                _ => propagation_matrix(&g, kind)?,
            })
        } else {
            None
        };
        structure_ms = ms(structure_start);
        solve_start = Instant::now();
        estimate = solve_with(kind, mode, &spec.solver, y, dense.as_ref(), &op)?;
    } else {
        let g = knn_gaussian_graph(&x, spec.knn, spec.bandwidth)?;
        structure = StructureSummary::Graph {
            edges: g.num_edges(),
            bandwidth: g.bandwidth().unwrap_or(f64::NAN),
        };
        let op_kind = match kind {
            LaplacianKind::Unnormalized => OperatorKind::Laplacian(kind),
            _ => OperatorKind::Propagation(kind),
        };
        let op = GraphOperator::new(&g, op_kind)?;
        let dense = if materialize {
            Some(match kind {
                LaplacianKind::Unnormalized => graph_laplacian(&g, kind),
                _ => graph_propagation_matrix(&g, kind)?,
            })
        } else {
            None
        };
        structure_ms = ms(structure_start);
        solve_start = Instant::now();
        estimate = solve_with(kind, mode, &spec.solver, y, dense.as_ref(), &op)?;
    }
    let solve_ms = ms(solve_start);

    if !estimate.converged {
        warnings.push(format!(
            "propagation did not converge within {} iterations (last change {:e})",
            estimate.iterations, estimate.residual
        ));
    }

    let estimates = labels.to_original_rows(&estimate.values);
    let prediction = predict(&estimates);
    let zero_confidence = prediction.zero_confidence.iter().filter(|&&z| z).count();

    let evaluation = match &data.truth {
        Some(truth) => {
            if let Some(&(s, _)) = truth.iter().find(|&&(s, _)| s >= n) {
                return Err(Error::InvalidInput(format!(
                    "truth sample {s} out of range (n = {n})"
                )));
            }
            let predicted: Vec<usize> = truth.iter().map(|&(s, _)| prediction.classes[s]).collect();
            let actual: Vec<usize> = truth.iter().map(|&(_, k)| k).collect();
            let counts = confusion(&predicted, &actual, c)?;
            Some(Evaluation {
                sensitivity: sensitivity(&counts),
                counts,
            })
        }
        None => None,
    };

    let metrics = Metrics {
        config: RunSpec {
            classes: Some(c),
            ..spec.clone()
        },
        data: DataSummary {
            samples: n,
            features: data.features.dim(),
            classes: c,
            labeled: labels.labeled(),
            scored: data.truth.as_ref().map_or(0, Vec::len),
            zero_confidence,
        },
        structure,
        solver: SolverSummary {
            method: estimate.method,
            matrix_free: !materialize,
            iterations: estimate.iterations,
            residual: estimate.residual,
            converged: estimate.converged,
        },
        evaluation,
        warnings,
    };

    Ok(RunOutcome {
        estimates,
        prediction,
        metrics,
        timing: Timing {
            structure_ms,
            solve_ms,
            total_ms: ms(start),
        },
    })
}

/// Parameter axes of a sweep. Hypergraph cells take `clusters`, graph cells
/// take `knn`; propagation methods ignore `gammas` and un-normalized methods
/// ignore `alphas`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub methods: Vec<Method>,
    pub clusters: Vec<usize>,
    pub knn: Vec<usize>,
    pub alphas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl SweepGrid {
    /// Grid holding only the base spec's values.
    pub fn single(base: &RunSpec) -> Self {
        Self {
            methods: vec![base.method],
            clusters: vec![base.clusters],
            knn: vec![base.knn],
            alphas: vec![base.solver.alpha],
            gammas: vec![base.solver.gamma],
        }
    }

    /// Cells in deterministic order: methods, then structure parameter,
    /// then α or γ.
    pub fn cells(&self, base: &RunSpec) -> Result<Vec<(String, RunSpec)>> {
        if self.methods.is_empty()
            || self.alphas.is_empty()
            || self.gammas.is_empty()
            || (self.methods.iter().any(|m| m.is_hypergraph()) && self.clusters.is_empty())
            || (self.methods.iter().any(|m| !m.is_hypergraph()) && self.knn.is_empty())
        {
            return Err(Error::InvalidInput("sweep grid has an empty axis".into()));
        }
        let mut cells = Vec::new();
        for &method in &self.methods {
            let (structure, key): (&[usize], &str) = if method.is_hypergraph() {
                (&self.clusters, "k")
            } else {
                (&self.knn, "knn")
            };
            let (reg, reg_key): (&[f64], &str) = if method.kind() == LaplacianKind::Unnormalized {
                (&self.gammas, "gamma")
            } else {
                (&self.alphas, "alpha")
            };
            for &s in structure {
                for &r in reg {
                    let mut spec = base.clone();
                    spec.method = method;
                    if method.is_hypergraph() {
                        spec.clusters = s;
                    } else {
                        spec.knn = s;
                    }
                    if method.kind() == LaplacianKind::Unnormalized {
                        spec.solver.gamma = r;
                    } else {
                        spec.solver.alpha = r;
                    }
                    let mut name = method.name().to_string();
                    if structure.len() > 1 {
                        name.push_str(&format!(" {key}={s}"));
                    }
                    if reg.len() > 1 {
                        name.push_str(&format!(" {reg_key}={r}"));
                    }
                    cells.push((name, spec));
                }
            }
        }
        Ok(cells)
    }
}

/// Runs every grid cell (in parallel, reported in grid order). Failing cells
/// become rows with an error instead of aborting the sweep.
pub fn sweep(base: &RunSpec, grid: &SweepGrid, data: &Dataset) -> Result<ComparisonReport> {
    if data.truth.is_none() {
        return Err(Error::InvalidInput(
            "a sweep needs a truth set to score".into(),
        ));
    }
    let cells = grid.cells(base)?;
    let rows: Vec<ReportRow> = cells
        .par_iter()
        .map(|(name, spec)| match run(spec, data) {
            Ok(out) => {
                let eval = out.metrics.evaluation.as_ref();
                let sens = eval.and_then(|e| e.sensitivity.as_ref());
                let error = (!out.converged()).then(|| "did not converge".to_string());
                ReportRow {
                    method: name.clone(),
                    micro_q: sens.map(|s| s.micro).filter(|_| error.is_none()),
                    macro_q: sens.and_then(|s| s.macro_).filter(|_| error.is_none()),
                    samples: eval.map_or(0, |e| e.counts.samples),
                    error,
                }
            }
            Err(e) => ReportRow {
                method: name.clone(),
                micro_q: None,
                macro_q: None,
                samples: 0,
                error: Some(e.to_string()),
            },
        })
        .collect();
    Ok(ComparisonReport::from_rows(rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{gaussian_blobs, rng, split_labeled};

    fn dataset() -> Dataset {
        let mut r = rng(4);
        let (x, classes) = gaussian_blobs(&mut r, &[vec![0.0, 0.0], vec![6.0, 0.0]], 30, 0.5);
        let (lab, rest) = split_labeled(&mut r, x.rows(), 0.5);
        Dataset {
            features: x,
            labels: lab.iter().map(|&i| (i, classes[i])).collect(),
            truth: Some(rest.iter().map(|&i| (i, classes[i])).collect()),
        }
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("hyper".parse::<Method>().is_err());
    }

    #[test]
    fn dense_and_matrix_free_agree() {
        let data = dataset();
        for method in Method::ALL {
            for mode in [SolverMode::ClosedForm, SolverMode::Iterative] {
                let spec = RunSpec {
                    method,
                    clusters: 6,
                    knn: 5,
                    solver: SolverConfig {
                        mode,
                        ..SolverConfig::default()
                    },
                    ..RunSpec::default()
                };
                let dense = run(&spec, &data).unwrap();
                let free = run(
                    &RunSpec {
                        dense_cap: 0,
                        ..spec.clone()
                    },
                    &data,
                )
                .unwrap();
                assert!(free.metrics.solver.matrix_free);
                let diff = (&dense.estimates - &free.estimates).amax();
                assert!(diff < 1e-7, "{method} {mode:?}: {diff}");
            }
        }
    }

    #[test]
    fn defaults_are_echoed() {
        let data = dataset();
        let spec = RunSpec {
            clusters: 6,
            ..RunSpec::default()
        };
        let out = run(&spec, &data).unwrap();
        assert_eq!(out.metrics.config.solver.alpha, 0.96);
        assert_eq!(out.metrics.config.solver.gamma, 1.0);
        assert_eq!(RunSpec::default().clusters, 250);
        assert_eq!(out.metrics.config.classes, Some(2));
    }

    #[test]
    fn no_labels_means_zero_confidence() {
        let mut data = dataset();
        data.labels.clear();
        let spec = RunSpec {
            clusters: 6,
            ..RunSpec::default()
        };
        let out = run(&spec, &data).unwrap();
        assert_eq!(out.estimates.amax(), 0.0);
        assert_eq!(out.metrics.data.zero_confidence, data.features.rows());
        assert!(!out.metrics.warnings.is_empty());
    }

    #[test]
    fn sweep_rows_and_failures() {
        let data = dataset();
        let base = RunSpec {
            method: Method::HyperSym,
            ..RunSpec::default()
        };
        let grid = SweepGrid {
            clusters: vec![3, 6, 1000],
            ..SweepGrid::single(&base)
        };
        let report = sweep(&base, &grid, &data).unwrap();
        assert_eq!(report.rows.len(), 3);
        assert!(report.rows[2].error.is_some());
        assert!(report.best.is_some());

        let empty = SweepGrid {
            methods: vec![],
            ..SweepGrid::single(&base)
        };
        assert!(sweep(&base, &empty, &data).is_err());
    }
}
