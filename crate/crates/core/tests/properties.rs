use approx::assert_abs_diff_eq;
use hgssl::checks::{random_labels, run_checks};
use hgssl::partition::{build_hypergraph, kmeans};
use hgssl::solver::{solve_propagation_closed, solve_unnormalized};
use hgssl::synthetic::{random_hypergraph, rng};
use hgssl::{
    compute_degrees, laplacian, propagation_matrix, quadratic_form_oracle, FeatureMatrix,
    LaplacianKind,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn quadratic_form_matches_oracle(seed in any::<u64>(), scale in 0.1f64..10.0) {
        let mut r = rng(seed);
        let g = random_hypergraph(&mut r, 15, 6, 5.0);
        let n = g.num_vertices();
        let f: Vec<f64> = (0..n).map(|i| scale * ((i as f64 * 1.7).sin())).collect();
        let l = laplacian(&g, LaplacianKind::Unnormalized);
        let fv = DVector::from_column_slice(&f);
        let quad = fv.dot(&(&l * &fv));
        let oracle = quadratic_form_oracle(&g, &f);
        prop_assert!((quad - oracle).abs() <= 1e-10 * (1.0 + quad.abs()));
        prop_assert!(quad >= -1e-10);
    }

    #[test]
    fn degrees_sum_to_weighted_edge_sizes(seed in any::<u64>()) {
        let g = random_hypergraph(&mut rng(seed), 20, 8, 5.0);
        let d = compute_degrees(&g);
        let lhs: f64 = d.vertex.iter().sum();
        let rhs: f64 = g.weights().iter().zip(&d.edge).map(|(w, &s)| w * s as f64).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn closed_form_is_linear_in_labels(seed in any::<u64>(), a in -3.0f64..3.0, gamma in 0.05f64..20.0) {
        let mut r = rng(seed);
        let g = random_hypergraph(&mut r, 12, 5, 5.0);
        let n = g.num_vertices();
        let y1 = random_labels(&mut r, n, 2);
        let y2 = random_labels(&mut r, n, 2);
        let combo = &y1 * a + &y2;
        let l = laplacian(&g, LaplacianKind::Unnormalized);
        let lhs = solve_unnormalized(&l, &combo, gamma).unwrap().values;
        let rhs = solve_unnormalized(&l, &y1, gamma).unwrap().values * a
            + solve_unnormalized(&l, &y2, gamma).unwrap().values;
        prop_assert!((lhs - rhs).amax() <= 1e-9);
    }

    #[test]
    fn propagation_preserves_row_mass_for_rw(seed in any::<u64>(), alpha in 0.01f64..0.99) {
        // S_rw 1 = 1, so a full one-hot labeling keeps unit row sums
        let mut r = rng(seed);
        let g = random_hypergraph(&mut r, 12, 5, 5.0);
        let n = g.num_vertices();
        let y = DMatrix::from_fn(n, 2, |i, j| if i % 2 == j { 1.0 } else { 0.0 });
        let s = propagation_matrix(&g, LaplacianKind::RandomWalk).unwrap();
        let f = solve_propagation_closed(&s, &y, alpha).unwrap().values;
        for row in f.row_iter() {
            prop_assert!((row.sum() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn kmeans_hypergraph_is_a_partition(seed in any::<u64>(), k in 2usize..6) {
        let rows: Vec<Vec<f64>> = (0..24).map(|i| vec![(i % 7) as f64, (i / 7) as f64 * 0.5]).collect();
        let x = FeatureMatrix::from_rows(&rows).unwrap();
        let a = kmeans(&x, k, seed, 100).unwrap();
        let g = build_hypergraph(&a, Default::default()).unwrap();
        for v in 0..x.rows() {
            prop_assert_eq!(g.memberships(v).len(), 1);
        }
        let d = compute_degrees(&g);
        prop_assert!(d.vertex.iter().all(|&dv| dv == 1.0));
    }
}

#[test]
fn invariant_suite_passes_across_seeds() {
    for seed in 0..10 {
        let report = run_checks(20, seed);
        assert!(report.passed(), "{}", report.to_text());
    }
}

#[test]
fn unit_weight_partition_laplacians_coincide() {
    // d(v) = 1 everywhere, so L = L_sym = L_rw
    let rows: Vec<Vec<f64>> = (0..12)
        .map(|i| vec![i as f64, (i * i % 5) as f64])
        .collect();
    let x = FeatureMatrix::from_rows(&rows).unwrap();
    let g = build_hypergraph(&kmeans(&x, 3, 9, 50).unwrap(), Default::default()).unwrap();
    let l = laplacian(&g, LaplacianKind::Unnormalized);
    for kind in [
        LaplacianKind::SymmetricNormalized,
        LaplacianKind::RandomWalk,
    ] {
        let other = laplacian(&g, kind);
        for (a, b) in l.iter().zip(other.iter()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }
}
