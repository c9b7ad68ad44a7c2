//! Seeded random instances: hypergraphs and graphs for the invariant suite,
//! and Gaussian blob datasets for end-to-end runs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::graph::WeightedGraph;
use crate::hypergraph::Hypergraph;
use crate::partition::FeatureMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random valid hypergraph with `2 <= n <= max_n`, `1 <= m <= max_m`, and
/// weights in `(0, max_weight]`. Uncovered vertices are added to a random
/// hyperedge.
pub fn random_hypergraph(
    rng: &mut impl Rng,
    max_n: usize,
    max_m: usize,
    max_weight: f64,
) -> Hypergraph {
    let n = rng.random_range(2..=max_n.max(2));
    let m = rng.random_range(1..=max_m.max(1));
    let mut vertices: Vec<usize> = (0..n).collect();
    let mut edges: Vec<Vec<usize>> = (0..m)
        .map(|_| {
            let size = rng.random_range(2..=n);
            vertices.shuffle(rng);
            vertices[..size].to_vec()
        })
        .collect();
    let mut covered = vec![false; n];
    for e in &edges {
        for &v in e {
            covered[v] = true;
        }
    }
    for (v, _) in covered.iter().enumerate().filter(|(_, &c)| !c) {
        let e = rng.random_range(0..m);
        edges[e].push(v);
    }
    let weights = (0..m).map(|_| positive_weight(rng, max_weight)).collect();
    Hypergraph::new(n, edges, weights).expect("generator produces valid hypergraphs")
}

/// Uniform in `(0, max]`.
fn positive_weight(rng: &mut impl Rng, max: f64) -> f64 {
    max * (1.0 - rng.random::<f64>())
}

/// Random hypergraph whose hyperedges are all vertex pairs, returned with
/// the matching pair list `(i, j, w)`.
pub fn random_pair_hypergraph(
    rng: &mut impl Rng,
    max_n: usize,
    max_weight: f64,
) -> (Hypergraph, Vec<(usize, usize, f64)>) {
    let n = rng.random_range(2..=max_n.max(2));
    let mut pairs = Vec::new();
    // a spanning path guarantees coverage; extra random pairs on top
    for v in 1..n {
        let u = rng.random_range(0..v);
        pairs.push((u, v, positive_weight(rng, max_weight)));
    }
    for _ in 0..rng.random_range(0..=n) {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i != j {
            pairs.push((i, j, positive_weight(rng, max_weight)));
        }
    }
    let edges = pairs.iter().map(|&(i, j, _)| vec![i, j]).collect();
    let weights = pairs.iter().map(|&(_, _, w)| w).collect();
    let g = Hypergraph::new(n, edges, weights).expect("pair hypergraph is valid");
    (g, pairs)
}

/// Random connected weighted graph on `3..=max_n` vertices.
pub fn random_graph(rng: &mut impl Rng, max_n: usize, max_weight: f64) -> WeightedGraph {
    let (g, pairs) = random_pair_hypergraph(rng, max_n.max(3), max_weight);
    WeightedGraph::from_edges(g.num_vertices(), &pairs).expect("random graph is valid")
}

/// Labeled Gaussian blobs in `dim` dimensions: `per_class` samples around
/// each center with isotropic standard deviation `spread`, interleaved so
/// sample `i` has class `i % centers.len()`.
pub fn gaussian_blobs(
    rng: &mut impl Rng,
    centers: &[Vec<f64>],
    per_class: usize,
    spread: f64,
) -> (FeatureMatrix, Vec<usize>) {
    let dim = centers[0].len();
    let noise = Normal::new(0.0, spread).expect("finite spread");
    let mut values = Vec::with_capacity(centers.len() * per_class * dim);
    let mut classes = Vec::with_capacity(centers.len() * per_class);
    for _ in 0..per_class {
        for (class, center) in centers.iter().enumerate() {
            values.extend(center.iter().map(|c| c + noise.sample(rng)));
            classes.push(class);
        }
    }
    let x = FeatureMatrix::new(classes.len(), dim, values).expect("finite blobs");
    (x, classes)
}

/// Splits samples into a labeled set of size `ceil(fraction * n)` and the
/// remainder, both sorted by index.
pub fn split_labeled(rng: &mut impl Rng, n: usize, fraction: f64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let l = ((fraction * n as f64).ceil() as usize).min(n);
    let mut labeled = idx[..l].to_vec();
    let mut rest = idx[l..].to_vec();
    labeled.sort_unstable();
    rest.sort_unstable();
    (labeled, rest)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generators_are_valid_and_seeded() {
        let mut a = rng(7);
        let mut b = rng(7);
        for _ in 0..50 {
            let g = random_hypergraph(&mut a, 20, 8, 5.0);
            assert_eq!(g, random_hypergraph(&mut b, 20, 8, 5.0));
            assert!(g.num_vertices() <= 20 && g.num_edges() <= 8);
            assert!(g.weights().iter().all(|&w| w > 0.0 && w <= 5.0));
        }
    }

    #[test]
    fn blobs_shape() {
        let (x, y) = gaussian_blobs(
            &mut rng(1),
            &[vec![0.0, 0.0], vec![5.0, 5.0], vec![0.0, 5.0]],
            100,
            1.0,
        );
        assert_eq!(x.rows(), 300);
        assert_eq!(y.iter().filter(|&&c| c == 2).count(), 100);
        let (l, u) = split_labeled(&mut rng(2), 300, 0.1);
        assert_eq!(l.len(), 30);
        assert_eq!(u.len(), 270);
    }
}
