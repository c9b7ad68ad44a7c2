//! Pairwise-graph baselines: a kNN Gaussian affinity graph and its three
//! Laplacians.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::{normalized_propagation, LaplacianKind, OperatorKind};
use crate::operator::LinearOperator;
use crate::partition::{squared_distance, FeatureMatrix};

/// Gaussian kernel width.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bandwidth {
    /// Median of the retained kNN distances.
    #[default]
    Auto,
    Fixed(f64),
}

/// Undirected weighted graph without self-loops, stored as sorted adjacency
/// lists. Every vertex has positive degree.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedGraph {
    n: usize,
    adjacency: Vec<Vec<(usize, f64)>>,
    degree: Vec<f64>,
    sigma: Option<f64>,
}

impl WeightedGraph {
    /// Builds a graph from undirected weighted edges. Repeated pairs add up.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut pairs: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        for &(i, j, w) in edges {
            if i >= n || j >= n {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i},{j}) out of range for n = {n}"
                )));
            }
            if i == j {
                return Err(Error::InvalidGraph(format!("self-loop at vertex {i}")));
            }
            if !(w.is_finite() && w >= 0.0) {
                return Err(Error::InvalidGraph(format!(
                    "edge ({i},{j}) has weight {w}"
                )));
            }
            *pairs.entry((i.min(j), i.max(j))).or_insert(0.0) += w;
        }
        Self::from_pairs(n, pairs, None)
    }

    fn from_pairs(
        n: usize,
        pairs: BTreeMap<(usize, usize), f64>,
        sigma: Option<f64>,
    ) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for ((i, j), w) in pairs {
            if w > 0.0 {
                adjacency[i].push((j, w));
                adjacency[j].push((i, w));
            }
        }
        for list in &mut adjacency {
            list.sort_by_key(|&(j, _)| j);
        }
        let degree: Vec<f64> = adjacency
            .iter()
            .map(|l| l.iter().map(|&(_, w)| w).sum())
            .collect();
        if let Some(v) = degree.iter().position(|&d| d <= 0.0) {
            return Err(Error::InvalidGraph(format!("vertex {v} has zero degree")));
        }
        Ok(Self {
            n,
            adjacency,
            degree,
            sigma,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn neighbors(&self, v: usize) -> &[(usize, f64)] {
        &self.adjacency[v]
    }

    pub fn degrees(&self) -> &[f64] {
        &self.degree
    }

    /// Kernel width used, for graphs built by [`knn_gaussian_graph`].
    pub fn bandwidth(&self) -> Option<f64> {
        self.sigma
    }

    pub fn num_edges(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn affinity(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for (i, list) in self.adjacency.iter().enumerate() {
            for &(j, w) in list {
                a[(i, j)] = w;
            }
        }
        a
    }
}

/// kNN graph with Gaussian weights `exp(-‖x_i − x_j‖² / (2σ²))`, keeping
/// `(i, j)` when either endpoint lists the other among its `k` nearest
/// neighbours. Neighbour ties break toward the lower index.
pub fn knn_gaussian_graph(
    x: &FeatureMatrix,
    k_neighbors: usize,
    bandwidth: Bandwidth,
) -> Result<WeightedGraph> {
    let n = x.rows();
    if k_neighbors == 0 || k_neighbors >= n {
        return Err(Error::param(
            "knn",
            format!("k_neighbors = {k_neighbors} must be in [1, {})", n),
        ));
    }
    if let Bandwidth::Fixed(s) = bandwidth {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::param("bandwidth", format!("{s} must be positive")));
        }
    }

    let neighbor_lists: Vec<Vec<(usize, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut cand: Vec<(usize, f64)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (j, squared_distance(x.row(i), x.row(j))))
                .collect();
            cand.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
            cand.truncate(k_neighbors);
            cand
        })
        .collect();

    let sigma = match bandwidth {
        Bandwidth::Fixed(s) => s,
        Bandwidth::Auto => auto_bandwidth(&neighbor_lists),
    };
    let two_sigma_sq = 2.0 * sigma * sigma;

    let mut pairs = BTreeMap::new();
    for (i, list) in neighbor_lists.iter().enumerate() {
        for &(j, d2) in list {
            let w = (-d2 / two_sigma_sq).exp();
            let slot = pairs.entry((i.min(j), i.max(j))).or_insert(0.0f64);
            *slot = slot.max(w);
        }
    }
    WeightedGraph::from_pairs(n, pairs, Some(sigma))
}

fn auto_bandwidth(lists: &[Vec<(usize, f64)>]) -> f64 {
    let mut dists: Vec<f64> = lists.iter().flatten().map(|&(_, d2)| d2.sqrt()).collect();
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let median = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if median > 0.0 {
        return median;
    }
    // mostly duplicate points: fall back to the mean positive distance
    let positive: Vec<f64> = dists.into_iter().filter(|&d| d > 0.0).collect();
    if positive.is_empty() {
        1.0
    } else {
        positive.iter().sum::<f64>() / positive.len() as f64
    }
}

/// `D − A`, `I − D^{-1/2} A D^{-1/2}` or `I − D^{-1} A`.
pub fn graph_laplacian(g: &WeightedGraph, kind: LaplacianKind) -> DMatrix<f64> {
    let a = g.affinity();
    let n = g.n;
    match kind {
        LaplacianKind::Unnormalized => {
            let mut l = -a;
            for v in 0..n {
                l[(v, v)] += g.degree[v];
            }
            l
        }
        _ => DMatrix::identity(n, n) - normalized_propagation(&a, &g.degree, kind),
    }
}

/// `D^{-1} A` or `D^{-1/2} A D^{-1/2}`.
pub fn graph_propagation_matrix(g: &WeightedGraph, kind: LaplacianKind) -> Result<DMatrix<f64>> {
    if kind == LaplacianKind::Unnormalized {
        return Err(Error::UnsupportedKind("the unnormalized graph Laplacian"));
    }
    Ok(normalized_propagation(&g.affinity(), &g.degree, kind))
}

/// Matrix-free counterpart of [`graph_laplacian`] / [`graph_propagation_matrix`].
pub struct GraphOperator<'a> {
    graph: &'a WeightedGraph,
    kind: OperatorKind,
    inv_sqrt_degree: Vec<f64>,
}

impl<'a> GraphOperator<'a> {
    pub fn new(graph: &'a WeightedGraph, kind: OperatorKind) -> Result<Self> {
        if kind == OperatorKind::Propagation(LaplacianKind::Unnormalized) {
            return Err(Error::UnsupportedKind("the unnormalized graph Laplacian"));
        }
        Ok(Self {
            graph,
            kind,
            inv_sqrt_degree: graph.degree.iter().map(|d| 1.0 / d.sqrt()).collect(),
        })
    }
}

impl LinearOperator for GraphOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        use LaplacianKind::*;
        let g = self.graph;
        let sym = matches!(
            self.kind,
            OperatorKind::Laplacian(SymmetricNormalized)
                | OperatorKind::Propagation(SymmetricNormalized)
        );
        for (v, o) in out.iter_mut().enumerate() {
            let ax: f64 = if sym {
                g.adjacency[v]
                    .iter()
                    .map(|&(j, w)| w * x[j] * self.inv_sqrt_degree[j])
                    .sum::<f64>()
                    * self.inv_sqrt_degree[v]
            } else {
                g.adjacency[v].iter().map(|&(j, w)| w * x[j]).sum()
            };
            *o = match self.kind {
                OperatorKind::Laplacian(Unnormalized) => g.degree[v] * x[v] - ax,
                OperatorKind::Laplacian(SymmetricNormalized) => x[v] - ax,
                OperatorKind::Laplacian(RandomWalk) => x[v] - ax / g.degree[v],
                OperatorKind::Propagation(SymmetricNormalized) => ax,
                OperatorKind::Propagation(RandomWalk) => ax / g.degree[v],
                OperatorKind::Propagation(Unnormalized) => unreachable!(),
            };
        }
    }

    fn is_symmetric(&self) -> bool {
        !matches!(
            self.kind,
            OperatorKind::Laplacian(LaplacianKind::RandomWalk)
                | OperatorKind::Propagation(LaplacianKind::RandomWalk)
        )
    }
}
