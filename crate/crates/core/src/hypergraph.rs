//! Hypergraph data model, degrees, and the three hypergraph Laplacians.
//!
//! With incidence `H` (n × m), hyperedge weights `W = diag(w)`, vertex
//! degrees `D_v = diag(Σ_e w(e) h(v,e))` and hyperedge degrees
//! `D_e = diag(Σ_v h(v,e))`, write `K = H W D_e⁻¹ Hᵀ`. Then
//!
//! ```text
//! L     = D_v − K
//! L_sym = I − D_v^{-1/2} K D_v^{-1/2}      S_sym = I − L_sym
//! L_rw  = I − D_v^{-1} K                   S_rw  = I − L_rw
//! ```
//!
//! Incidence is stored sparsely as member lists; dense matrices are built on
//! request and [`HypergraphOperator`] applies any of them without
//! materializing `K`.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::LinearOperator;

/// Which Laplacian (and hence which propagation matrix) to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LaplacianKind {
    Unnormalized,
    SymmetricNormalized,
    RandomWalk,
}

impl LaplacianKind {
    pub const ALL: [LaplacianKind; 3] = [
        LaplacianKind::Unnormalized,
        LaplacianKind::SymmetricNormalized,
        LaplacianKind::RandomWalk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LaplacianKind::Unnormalized => "unnormalized",
            LaplacianKind::SymmetricNormalized => "symmetric-normalized",
            LaplacianKind::RandomWalk => "random-walk",
        }
    }
}

/// A weighted hypergraph on vertices `0..n`.
///
/// Invariants, checked on construction: every hyperedge has at least two
/// distinct members, every vertex lies in at least one hyperedge, and every
/// weight is finite and strictly positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Hypergraph {
    n: usize,
    edges: Vec<Vec<usize>>,
    weights: Vec<f64>,
    memberships: Vec<Vec<usize>>,
}

impl Hypergraph {
    /// Builds a hypergraph from hyperedge member lists. Member order is
    /// irrelevant; lists are stored sorted.
    pub fn new(n: usize, edges: Vec<Vec<usize>>, weights: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidHypergraph("no vertices".into()));
        }
        if edges.is_empty() {
            return Err(Error::InvalidHypergraph("no hyperedges".into()));
        }
        if edges.len() != weights.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} hyperedge weights", edges.len()),
                actual: format!("{}", weights.len()),
            });
        }
        let mut memberships = vec![Vec::new(); n];
        let mut sorted_edges = Vec::with_capacity(edges.len());
        for (e, (mut members, &w)) in edges.into_iter().zip(&weights).enumerate() {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {e} has non-positive weight {w}"
                )));
            }
            members.sort_unstable();
            members.dedup();
            if let Some(&bad) = members.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {e} references vertex {bad} but n = {n}"
                )));
            }
            if members.len() < 2 {
                return Err(Error::InvalidHypergraph(format!(
                    "hyperedge {e} has {} member(s); at least 2 required",
                    members.len()
                )));
            }
            for &v in &members {
                memberships[v].push(e);
            }
            sorted_edges.push(members);
        }
        if let Some(v) = memberships.iter().position(Vec::is_empty) {
            return Err(Error::InvalidHypergraph(format!(
                "vertex {v} belongs to no hyperedge"
            )));
        }
        Ok(Self {
            n,
            edges: sorted_edges,
            weights,
            memberships,
        })
    }

    /// Builds a hypergraph from a dense 0/1 incidence matrix (rows are
    /// vertices, columns hyperedges).
    pub fn from_incidence(incidence: &DMatrix<f64>, weights: Vec<f64>) -> Result<Self> {
        let (n, m) = incidence.shape();
        let mut edges = vec![Vec::new(); m];
        for e in 0..m {
            for v in 0..n {
                let h = incidence[(v, e)];
                if h == 1.0 {
                    edges[e].push(v);
                } else if h != 0.0 {
                    return Err(Error::InvalidHypergraph(format!(
                        "incidence entry ({v},{e}) = {h}; only 0/1 allowed"
                    )));
                }
            }
            if edges[e].is_empty() {
                return Err(Error::InvalidHypergraph(format!(
                    "incidence column {e} is all zero"
                )));
            }
        }
        for v in 0..n {
            if incidence.row(v).iter().all(|&h| h == 0.0) {
                return Err(Error::InvalidHypergraph(format!(
                    "incidence row {v} is all zero"
                )));
            }
        }
        Self::new(n, edges, weights)
    }

    /// Same hypergraph with every weight set to one.
    pub fn with_unit_weights(n: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        let m = edges.len();
        Self::new(n, edges, vec![1.0; m])
    }

    pub fn num_vertices(&self) -> usize {
        self.n
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Hyperedges containing vertex `v`.
    pub fn memberships(&self, v: usize) -> &[usize] {
        &self.memberships[v]
    }

    pub fn incidence(&self) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.edges.len());
        for (e, members) in self.edges.iter().enumerate() {
            for &v in members {
                h[(v, e)] = 1.0;
            }
        }
        h
    }
}

/// Vertex and hyperedge degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct DegreeData {
    /// `d(v) = Σ_e w(e) h(v,e)`
    pub vertex: Vec<f64>,
    /// `d(e) = Σ_v h(v,e)`
    pub edge: Vec<usize>,
}

impl DegreeData {
    pub fn vertex_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(&self.vertex))
    }

    pub fn edge_matrix(&self) -> DMatrix<f64> {
        let e: Vec<f64> = self.edge.iter().map(|&d| d as f64).collect();
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(e))
    }
}

pub fn compute_degrees(g: &Hypergraph) -> DegreeData {
    let vertex = g
        .memberships
        .iter()
        .map(|edges| edges.iter().map(|&e| g.weights[e]).sum())
        .collect();
    let edge = g.edges.iter().map(Vec::len).collect();
    DegreeData { vertex, edge }
}

/// `K = H W D_e⁻¹ Hᵀ`, exactly symmetric.
fn clique_expansion(g: &Hypergraph) -> DMatrix<f64> {
    let mut k = DMatrix::zeros(g.n, g.n);
    for (members, &w) in g.edges.iter().zip(&g.weights) {
        let c = w / members.len() as f64;
        for &u in members {
            for &v in members {
                k[(u, v)] += c;
            }
        }
    }
    k
}

/// Dense Laplacian of the requested kind.
pub fn laplacian(g: &Hypergraph, kind: LaplacianKind) -> DMatrix<f64> {
    let deg = compute_degrees(g);
    let k = clique_expansion(g);
    let n = g.n;
    match kind {
        LaplacianKind::Unnormalized => {
            let mut l = -k;
            for v in 0..n {
                l[(v, v)] += deg.vertex[v];
            }
            l
        }
        LaplacianKind::SymmetricNormalized | LaplacianKind::RandomWalk => {
            let s = normalized_propagation(&k, &deg.vertex, kind);
            DMatrix::identity(n, n) - s
        }
    }
}

/// Dense propagation matrix `S_rw` or `S_sym`.
pub fn propagation_matrix(g: &Hypergraph, kind: LaplacianKind) -> Result<DMatrix<f64>> {
    if kind == LaplacianKind::Unnormalized {
        return Err(Error::UnsupportedKind("the unnormalized Laplacian"));
    }
    let deg = compute_degrees(g);
    let k = clique_expansion(g);
    Ok(normalized_propagation(&k, &deg.vertex, kind))
}

/// `D^{-1} K` or `D^{-1/2} K D^{-1/2}`; shared with the graph baseline.
pub(crate) fn normalized_propagation(
    k: &DMatrix<f64>,
    degree: &[f64],
    kind: LaplacianKind,
) -> DMatrix<f64> {
    let n = k.nrows();
    match kind {
        LaplacianKind::RandomWalk => DMatrix::from_fn(n, n, |u, v| k[(u, v)] / degree[u]),
        LaplacianKind::SymmetricNormalized => {
            let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
            // (s_u * s_v) commutes exactly, so the result is exactly symmetric
            DMatrix::from_fn(n, n, |u, v| k[(u, v)] * (inv_sqrt[u] * inv_sqrt[v]))
        }
        LaplacianKind::Unnormalized => unreachable!("unnormalized has no propagation matrix"),
    }
}

/// `½ Σ_e Σ_{u,v ∈ e} (w(e)/d(e)) (f(u) − f(v))²` by explicit summation over
/// ordered vertex pairs. Independent of [`laplacian`]; equals `fᵀ L f`.
pub fn quadratic_form_oracle(g: &Hypergraph, f: &[f64]) -> f64 {
    assert_eq!(f.len(), g.n, "vector length must equal vertex count");
    let mut total = 0.0;
    for (members, &w) in g.edges.iter().zip(&g.weights) {
        let c = w / members.len() as f64;
        for &u in members {
            for &v in members {
                let diff = f[u] - f[v];
                total += c * diff * diff;
            }
        }
    }
    0.5 * total
}

/// Which hypergraph operator a [`HypergraphOperator`] applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    Laplacian(LaplacianKind),
    /// Only the normalized kinds have a propagation matrix.
    Propagation(LaplacianKind),
}

/// Matrix-free hypergraph operator:
/// `Kx = H (W D_e⁻¹ (Hᵀ x))` followed by the diagonal scalings of the kind.
pub struct HypergraphOperator<'a> {
    graph: &'a Hypergraph,
    kind: OperatorKind,
    degree: Vec<f64>,
    inv_sqrt_degree: Vec<f64>,
}

impl<'a> HypergraphOperator<'a> {
    pub fn new(graph: &'a Hypergraph, kind: OperatorKind) -> Result<Self> {
        if kind == OperatorKind::Propagation(LaplacianKind::Unnormalized) {
            return Err(Error::UnsupportedKind("the unnormalized Laplacian"));
        }
        let degree = compute_degrees(graph).vertex;
        let inv_sqrt_degree = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
        Ok(Self {
            graph,
            kind,
            degree,
            inv_sqrt_degree,
        })
    }

    fn apply_k(&self, x: &[f64], out: &mut [f64]) {
        let g = self.graph;
        let edge_sums: Vec<f64> = g
            .edges
            .iter()
            .zip(&g.weights)
            .map(|(members, &w)| {
                let s: f64 = members.iter().map(|&v| x[v]).sum();
                s * w / members.len() as f64
            })
            .collect();
        for (v, o) in out.iter_mut().enumerate() {
            *o = g.memberships[v].iter().map(|&e| edge_sums[e]).sum();
        }
    }
}

impl LinearOperator for HypergraphOperator<'_> {
    fn dim(&self) -> usize {
        self.graph.n
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        use LaplacianKind::*;
        let normalized = matches!(
            self.kind,
            OperatorKind::Laplacian(SymmetricNormalized)
                | OperatorKind::Propagation(SymmetricNormalized)
        );
        if normalized {
            let scaled: Vec<f64> = x
                .iter()
                .zip(&self.inv_sqrt_degree)
                .map(|(a, s)| a * s)
                .collect();
            self.apply_k(&scaled, out);
            for (o, s) in out.iter_mut().zip(&self.inv_sqrt_degree) {
                *o *= s;
            }
        } else {
            self.apply_k(x, out);
        }
        match self.kind {
            OperatorKind::Laplacian(Unnormalized) => {
                for ((o, &xi), d) in out.iter_mut().zip(x).zip(&self.degree) {
                    *o = d * xi - *o;
                }
            }
            OperatorKind::Laplacian(SymmetricNormalized) => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = xi - *o;
                }
            }
            OperatorKind::Laplacian(RandomWalk) => {
                for ((o, &xi), d) in out.iter_mut().zip(x).zip(&self.degree) {
                    *o = xi - *o / d;
                }
            }
            OperatorKind::Propagation(SymmetricNormalized) => {}
            OperatorKind::Propagation(RandomWalk) => {
                for (o, d) in out.iter_mut().zip(&self.degree) {
                    *o /= d;
                }
            }
            OperatorKind::Propagation(Unnormalized) => unreachable!(),
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
