//! Hyperedges from k-means clusters.
//!
//! Lloyd's algorithm with k-means++ seeding; every cluster becomes one
//! hyperedge. Clusters that end up with fewer than two members cannot be
//! hyperedges, so they are dissolved and their members moved to the nearest
//! surviving centroid.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypergraph::Hypergraph;

/// Dense row-major `n × d` sample matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n: usize,
    d: usize,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(n: usize, d: usize, values: Vec<f64>) -> Result<Self> {
        if n == 0 || d == 0 {
            return Err(Error::InvalidInput(format!(
                "feature matrix must be non-empty, got {n}x{d}"
            )));
        }
        if values.len() != n * d {
            return Err(Error::ShapeMismatch {
                expected: format!("{} values for {n}x{d}", n * d),
                actual: format!("{}", values.len()),
            });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "non-finite feature at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        Ok(Self { n, d, values })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::InvalidInput(format!(
                "row {i} has {} values, expected {d}",
                rows[i].len()
            )));
        }
        Self::new(rows.len(), d, rows.concat())
    }

    pub fn rows(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.d..(i + 1) * self.d]
    }

    /// Row `i` of the result is row `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(order.len() * self.d);
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        Self {
            n: order.len(),
            d: self.d,
            values,
        }
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of [`kmeans`] after singleton repair.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    /// Number of clusters that survived repair.
    pub k: usize,
    /// Cluster index in `0..k` for every sample.
    pub assignment: Vec<usize>,
    /// Row-major `k × d` centroids.
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances to the assigned centroids.
    pub inertia: f64,
    /// Mean squared distance to the centroid, per cluster.
    pub cluster_spread: Vec<f64>,
    /// `k` as requested by the caller.
    pub requested_k: usize,
    /// Clusters removed by the singleton rule (`requested_k - k`).
    pub dissolved: usize,
    /// Lloyd iterations performed.
    pub iterations: usize,
    /// Inertia after each Lloyd update step.
    pub inertia_history: Vec<f64>,
}

impl ClusterAssignment {
    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &c in &self.assignment {
            sizes[c] += 1;
        }
        sizes
    }
}

fn nearest(point: &[f64], centroids: &[Vec<f64>], alive: &[bool]) -> usize {
    let mut best = usize::MAX;
    let mut best_d = f64::INFINITY;
    for (c, centroid) in centroids.iter().enumerate() {
        if !alive[c] {
            continue;
        }
        let d = squared_distance(point, centroid);
        // strict comparison: ties go to the lowest index
        if d < best_d || best == usize::MAX {
            best = c;
            best_d = d;
        }
    }
    best
}

fn kmeans_plus_plus(x: &FeatureMatrix, k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = x.rows();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![x.row(first).to_vec()];
    let mut closest: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.row(i), &centroids[0]))
        .collect();

    while centroids.len() < k {
        let next = match WeightedIndex::new(&closest) {
            Ok(dist) => dist.sample(rng),
            // every remaining point coincides with a centroid
            Err(_) => (0..n).find(|&i| !chosen[i]).unwrap_or(0),
        };
        chosen[next] = true;
        let c = x.row(next).to_vec();
        for (i, best) in closest.iter_mut().enumerate() {
            let d = squared_distance(x.row(i), &c);
            if d < *best {
                *best = d;
            }
        }
        centroids.push(c);
    }
    centroids
}

fn update_centroids(
    x: &FeatureMatrix,
    assignment: &[usize],
    centroids: &mut [Vec<f64>],
) -> Vec<usize> {
    let k = centroids.len();
    let d = x.dim();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(x.row(i)) {
            *s += v;
        }
    }
    for c in 0..k {
        // empty clusters keep their previous centroid
        if counts[c] > 0 {
            let inv = counts[c] as f64;
            for (dst, s) in centroids[c].iter_mut().zip(&sums[c]) {
                *dst = s / inv;
            }
        }
    }
    counts
}

fn inertia(x: &FeatureMatrix, assignment: &[usize], centroids: &[Vec<f64>]) -> f64 {
    assignment
        .iter()
        .enumerate()
        .map(|(i, &c)| squared_distance(x.row(i), &centroids[c]))
        .sum()
}

/// Lloyd k-means with k-means++ seeding, followed by the singleton repair.
///
/// Requires `n >= 4` and `2 <= k <= n / 2`. The result is a deterministic
/// function of `(x, k, seed, max_iter)`.
pub fn kmeans(
    x: &FeatureMatrix,
    k: usize,
    seed: u64,
    max_iter: usize,
) -> Result<ClusterAssignment> {
    let n = x.rows();
    if n < 4 {
        return Err(Error::param(
            "k-means",
            format!("need at least 4 samples, got {n}"),
        ));
    }
    if k < 2 || k > n / 2 {
        return Err(Error::param(
            "clusters",
            format!("k = {k} outside [2, {}] for n = {n}", n / 2),
        ));
    }
    if max_iter == 0 {
        return Err(Error::param("max_iter", "must be positive"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeans_plus_plus(x, k, &mut rng);
    let all_alive = vec![true; k];
    let mut assignment = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        let next: Vec<usize> = (0..n)
            .into_par_iter()
            .map(|i| nearest(x.row(i), &centroids, &all_alive))
            .collect();
        let changed = next != assignment;
        assignment = next;
        if !changed {
            break;
        }
        update_centroids(x, &assignment, &mut centroids);
        history.push(inertia(x, &assignment, &centroids));
        iterations += 1;
    }

    Ok(repair(x, assignment, centroids, k, iterations, history))
}

/// Dissolves clusters with fewer than two members and compacts indices.
fn repair(
    x: &FeatureMatrix,
    mut assignment: Vec<usize>,
    mut centroids: Vec<Vec<f64>>,
    requested_k: usize,
    iterations: usize,
    history: Vec<f64>,
) -> ClusterAssignment {
    let mut counts = vec![0usize; centroids.len()];
    for &c in &assignment {
        counts[c] += 1;
    }
    let alive: Vec<bool> = counts.iter().map(|&c| c >= 2).collect();
    if alive.iter().any(|a| !a) {
        for (i, c) in assignment.iter_mut().enumerate() {
            if !alive[*c] {
                *c = nearest(x.row(i), &centroids, &alive);
            }
        }
        update_centroids(x, &assignment, &mut centroids);
    }

    let mut remap = vec![usize::MAX; centroids.len()];
    let mut kept = Vec::new();
    for (c, centroid) in centroids.into_iter().enumerate() {
        if alive[c] {
            remap[c] = kept.len();
            kept.push(centroid);
        }
    }
    for c in assignment.iter_mut() {
        *c = remap[*c];
    }
    let k = kept.len();

    let mut sse = vec![0.0; k];
    let mut sizes = vec![0usize; k];
    for (i, &c) in assignment.iter().enumerate() {
        sse[c] += squared_distance(x.row(i), &kept[c]);
        sizes[c] += 1;
    }
    let cluster_spread = sse.iter().zip(&sizes).map(|(s, &m)| s / m as f64).collect();

    ClusterAssignment {
        k,
        inertia: sse.iter().sum(),
        cluster_spread,
        assignment,
        centroids: kept,
        requested_k,
        dissolved: requested_k - k,
        iterations,
        inertia_history: history,
    }
}

/// How hyperedge weights are derived from clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightingRule {
    /// `w(e) = 1`
    #[default]
    Unit,
    /// `w(e) = 1 / (ε + mean squared distance to the centroid)`, `ε = 1e-9`
    InverseVariance,
}

pub const INVERSE_VARIANCE_EPS: f64 = 1e-9;

/// One hyperedge per cluster: `h(v, e) = 1` iff sample `v` is in cluster `e`.
pub fn build_hypergraph(a: &ClusterAssignment, weighting: WeightingRule) -> Result<Hypergraph> {
    let mut edges = vec![Vec::new(); a.k];
    for (v, &c) in a.assignment.iter().enumerate() {
        if c >= a.k {
            return Err(Error::InvalidInput(format!(
                "sample {v} assigned to cluster {c}, but k = {}",
                a.k
            )));
        }
        edges[c].push(v);
    }
    if let Some(e) = edges.iter().position(|m| m.len() < 2) {
        return Err(Error::InvalidInput(format!(
            "cluster {e} has {} member(s); hyperedges need at least 2",
            edges[e].len()
        )));
    }
    let weights = match weighting {
        WeightingRule::Unit => vec![1.0; a.k],
        WeightingRule::InverseVariance => {
            if a.cluster_spread.len() != a.k {
                return Err(Error::ShapeMismatch {
                    expected: format!("{} cluster spreads", a.k),
                    actual: format!("{}", a.cluster_spread.len()),
                });
            }
            a.cluster_spread
                .iter()
                .map(|s| 1.0 / (INVERSE_VARIANCE_EPS + s))
                .collect()
        }
    };
    Hypergraph::new(a.assignment.len(), edges, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypergraph::compute_degrees;
    use rand_distr::Normal;

    fn blobs(seed: u64) -> (FeatureMatrix, Vec<usize>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 0.1).unwrap();
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (label, center) in [(0.0, 0.0), (100.0, 100.0)].iter().enumerate() {
            for _ in 0..10 {
                rows.push(vec![
                    center.0 + noise.sample(&mut rng),
                    center.1 + noise.sample(&mut rng),
                ]);
                truth.push(label);
            }
        }
        (FeatureMatrix::from_rows(&rows).unwrap(), truth)
    }

    #[test]
    fn recovers_separated_blobs() {
        let (x, truth) = blobs(3);
        let a = kmeans(&x, 2, 11, 300).unwrap();
        assert_eq!(a.k, 2);
        let flip = a.assignment[0] != truth[0];
        for (got, want) in a.assignment.iter().zip(&truth) {
            assert_eq!(if flip { 1 - got } else { *got }, *want);
        }
    }

    #[test]
    fn identical_rows_are_repaired() {
        let x = FeatureMatrix::from_rows(&vec![vec![1.0, 2.0]; 6]).unwrap();
        let a = kmeans(&x, 2, 0, 300).unwrap();
        assert_eq!(a.k, 1);
        assert_eq!(a.dissolved, 1);
        assert!(a.assignment.iter().all(|&c| c == 0));
        assert_eq!(a.inertia, 0.0);
        let g = build_hypergraph(&a, WeightingRule::Unit).unwrap();
        assert_eq!(g.num_edges(), 1);
    }

    #[test]
    fn half_as_many_clusters_as_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..500)
            .map(|_| (0..4).map(|_| rng.random::<f64>()).collect())
            .collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let a = kmeans(&x, 250, 1, 300).unwrap();
        assert!(a.k <= 250);
        assert_eq!(a.k + a.dissolved, 250);
        assert!(a.cluster_sizes().iter().all(|&s| s >= 2));
        let g = build_hypergraph(&a, WeightingRule::Unit).unwrap();
        assert_eq!(g.num_vertices(), 500);
    }

    #[test]
    fn rejects_bad_k() {
        let (x, _) = blobs(0);
        assert!(kmeans(&x, 1, 0, 10).is_err());
        assert!(kmeans(&x, 11, 0, 10).is_err());
        assert!(kmeans(&x, 10, 0, 10).is_ok());
        let tiny = FeatureMatrix::from_rows(&[vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        assert!(kmeans(&tiny, 2, 0, 10).is_err());
    }

    #[test]
    fn inertia_never_increases() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                vec![
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                    rng.random::<f64>(),
                ]
            })
            .collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let a = kmeans(&x, 12, 4, 300).unwrap();
        assert!(a.inertia_history.len() >= 2);
        for w in a.inertia_history.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} > {}", w[1], w[0]);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let (x, _) = blobs(1);
        let a = kmeans(&x, 4, 42, 300).unwrap();
        let b = kmeans(&x, 4, 42, 300).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn transcribes_assignment() {
        let a = ClusterAssignment {
            k: 2,
            assignment: vec![0, 0, 1, 1],
            centroids: vec![vec![0.0], vec![1.0]],
            inertia: 0.0,
            cluster_spread: vec![0.0, 0.0],
            requested_k: 2,
            dissolved: 0,
            iterations: 1,
            inertia_history: vec![0.0],
        };
        let g = build_hypergraph(&a, WeightingRule::Unit).unwrap();
        let h = g.incidence();
        assert_eq!(
            h,
            nalgebra::DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 0.0, 1.0, 0.0, 1.0])
        );
        assert_eq!(g.weights(), &[1.0, 1.0]);
        assert_eq!(compute_degrees(&g).vertex, vec![1.0; 4]);
    }

    #[test]
    fn inverse_variance_weight() {
        let a = ClusterAssignment {
            k: 1,
            assignment: vec![0, 0, 0],
            centroids: vec![vec![0.0]],
            inertia: 0.75,
            cluster_spread: vec![0.25],
            requested_k: 1,
            dissolved: 0,
            iterations: 1,
            inertia_history: vec![0.75],
        };
        let g = build_hypergraph(&a, WeightingRule::InverseVariance).unwrap();
        assert!((g.weights()[0] - 4.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_singleton_clusters() {
        let a = ClusterAssignment {
            k: 2,
            assignment: vec![0, 0, 1],
            centroids: vec![vec![0.0], vec![1.0]],
            inertia: 0.0,
            cluster_spread: vec![0.0, 0.0],
            requested_k: 2,
            dissolved: 0,
            iterations: 1,
            inertia_history: vec![],
        };
        assert!(build_hypergraph(&a, WeightingRule::Unit).is_err());
    }
}
