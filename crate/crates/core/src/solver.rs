//! Label matrices, propagation, and the closed-form solutions.
//!
//! Iterative propagation runs `F ← αSF + (1−α)Y` from `F⁽⁰⁾ = Y`. Its limit is
//! `(1−α)(I−αS)⁻¹Y`; the un-normalized method solves `(L+γI)F = γY` and the
//! regularized symmetric form solves `(L_sym+γI)F = γY`, which coincides with
//! the propagation limit for `S_sym` at `α = 1/(1+γ)`.
//!
//! All solvers are linear in `Y` and take it as a plain `n × c` matrix, so
//! sums and permutations of label matrices can be fed in directly.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{krylov_solve, KrylovOptions, LinearOperator, Shifted};

/// Initial label matrix `Y`, with labeled samples moved to the leading rows.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMatrix {
    values: DMatrix<f64>,
    labeled: usize,
    order: Vec<usize>,
}

impl LabelMatrix {
    /// `n × c` matrix; rows `labeled..n` are zero.
    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn num_samples(&self) -> usize {
        self.values.nrows()
    }

    pub fn num_classes(&self) -> usize {
        self.values.ncols()
    }

    pub fn labeled(&self) -> usize {
        self.labeled
    }

    /// `order[i]` is the original sample index of row `i`.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Maps a matrix in label-matrix row order back to original sample order.
    pub fn to_original_rows(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(m.nrows(), m.ncols());
        for (row, &orig) in self.order.iter().enumerate() {
            out.row_mut(orig).copy_from(&m.row(row));
        }
        out
    }
}

/// Builds `Y` from `(sample, class)` pairs: `+1` for the sample's class, `−1`
/// for every other class, zero rows for unlabeled samples. Labeled samples
/// are placed first, each group in ascending sample order.
pub fn initial_labels(assignments: &[(usize, usize)], n: usize, c: usize) -> Result<LabelMatrix> {
    if n == 0 {
        return Err(Error::param("n", "must be positive"));
    }
    if c == 0 {
        return Err(Error::param("classes", "must be positive"));
    }
    let mut class_of = vec![None; n];
    for &(sample, class) in assignments {
        if sample >= n {
            return Err(Error::InvalidInput(format!(
                "sample index {sample} out of range (n = {n})"
            )));
        }
        if class >= c {
            return Err(Error::InvalidInput(format!(
                "class index {class} out of range (c = {c}) for sample {sample}"
            )));
        }
        if class_of[sample].replace(class).is_some() {
            return Err(Error::InvalidInput(format!(
                "sample {sample} labeled more than once"
            )));
        }
    }
    let mut order: Vec<usize> = (0..n).filter(|&i| class_of[i].is_some()).collect();
    let labeled = order.len();
    order.extend((0..n).filter(|&i| class_of[i].is_none()));

    let mut values = DMatrix::zeros(n, c);
    for (row, &sample) in order.iter().take(labeled).enumerate() {
        let class = class_of[sample].expect("labeled prefix");
        for j in 0..c {
            values[(row, j)] = if j == class { 1.0 } else { -1.0 };
        }
    }
    Ok(LabelMatrix {
        values,
        labeled,
        order,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverMode {
    Iterative,
    ClosedForm,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub alpha: f64,
    pub gamma: f64,
    /// Stop when the max-abs entry change between iterates is at most this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub mode: SolverMode,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 0.96,
            gamma: 1.0,
            tolerance: 1e-10,
            max_iterations: 10_000,
            mode: SolverMode::ClosedForm,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        check_gamma(self.gamma)?;
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(Error::param(
                "tol",
                format!("{} must be positive", self.tolerance),
            ));
        }
        if self.max_iterations == 0 {
            return Err(Error::param("max-iter", "must be positive"));
        }
        Ok(())
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::param("alpha", format!("{alpha} not in (0, 1)")));
    }
    Ok(())
}

fn check_gamma(gamma: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::param("gamma", format!("{gamma} must be positive")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveMethod {
    Iterative,
    DenseLu,
    DenseCholesky,
    ConjugateGradient,
    BiCgStab,
}

/// Estimated label matrix `F` plus how it was obtained.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateMatrix {
    pub values: DMatrix<f64>,
    pub method: SolveMethod,
    /// Propagation steps or Krylov iterations (max over columns); 0 for dense.
    pub iterations: usize,
    /// Last iterate change for propagation, otherwise the linear-system
    /// residual (max-abs for dense solves, relative 2-norm for Krylov).
    pub residual: f64,
    pub converged: bool,
    /// Max-abs change per propagation step; empty for direct solves.
    pub change_history: Vec<f64>,
}

fn check_rhs(n: usize, y: &DMatrix<f64>) -> Result<()> {
    if y.nrows() != n {
        return Err(Error::ShapeMismatch {
            expected: format!("label matrix with {n} rows"),
            actual: format!("{} rows", y.nrows()),
        });
    }
    Ok(())
}

fn check_square(m: &DMatrix<f64>) -> Result<()> {
    if m.nrows() != m.ncols() {
        return Err(Error::ShapeMismatch {
            expected: "square matrix".into(),
            actual: format!("{}x{}", m.nrows(), m.ncols()),
        });
    }
    Ok(())
}

/// Iterates `F⁽ᵗ⁺¹⁾ = αSF⁽ᵗ⁾ + (1−α)Y` from `F⁽⁰⁾ = Y` until the max-abs
/// change is at most `cfg.tolerance`. Hitting `cfg.max_iterations` returns
/// the last iterate with `converged = false`.
pub fn propagate_iterative<A: LinearOperator + ?Sized>(
    s: &A,
    y: &DMatrix<f64>,
    cfg: &SolverConfig,
) -> Result<EstimateMatrix> {
    cfg.validate()?;
    check_rhs(s.dim(), y)?;
    let alpha = cfg.alpha;
    let anchor = y * (1.0 - alpha);
    let mut f = y.clone();
    let mut history = Vec::new();
    let mut converged = false;

    while history.len() < cfg.max_iterations {
        let mut next = s.apply_matrix(&f);
        next *= alpha;
        next += &anchor;
        let change = (&next - &f).amax();
        f = next;
        history.push(change);
        if !change.is_finite() {
            break;
        }
        if change <= cfg.tolerance {
            converged = true;
            break;
        }
    }

    Ok(EstimateMatrix {
        values: f,
        method: SolveMethod::Iterative,
        iterations: history.len(),
        residual: history.last().copied().unwrap_or(0.0),
        converged,
        change_history: history,
    })
}

fn dense_result(
    values: DMatrix<f64>,
    system: &DMatrix<f64>,
    rhs: &DMatrix<f64>,
    method: SolveMethod,
) -> EstimateMatrix {
    let residual = (system * &values - rhs).amax();
    EstimateMatrix {
        values,
        method,
        iterations: 0,
        residual,
        converged: true,
        change_history: Vec::new(),
    }
}

/// `(1−α)(I−αS)⁻¹Y` by dense factorization: Cholesky when `S` is exactly
/// symmetric (then `I−αS` is positive definite), LU otherwise.
pub fn solve_propagation_closed(
    s: &DMatrix<f64>,
    y: &DMatrix<f64>,
    alpha: f64,
) -> Result<EstimateMatrix> {
    check_alpha(alpha)?;
    check_square(s)?;
    check_rhs(s.nrows(), y)?;
    let n = s.nrows();
    let system = DMatrix::identity(n, n) - s * alpha;
    let rhs = y * (1.0 - alpha);
    if s == &s.transpose() {
        if let Some(chol) = system.clone().cholesky() {
            let values = chol.solve(&rhs);
            return Ok(dense_result(
                values,
                &system,
                &rhs,
                SolveMethod::DenseCholesky,
            ));
        }
    }
    let lu = system.clone().lu();
    let values = lu.solve(&rhs).ok_or_else(|| {
        Error::Singular(format!(
            "I - αS is singular at α = {alpha}; is the spectral radius of S above 1/α?"
        ))
    })?;
    Ok(dense_result(values, &system, &rhs, SolveMethod::DenseLu))
}

/// `(1−α)(I−αS)⁻¹Y` with a Krylov solver on the operator; CG when `S` is
/// symmetric, BiCGSTAB otherwise.
pub fn solve_propagation_krylov<A: LinearOperator + ?Sized>(
    s: &A,
    y: &DMatrix<f64>,
    alpha: f64,
) -> Result<EstimateMatrix> {
    check_alpha(alpha)?;
    check_rhs(s.dim(), y)?;
    let system = Shifted::new(s, 1.0, -alpha);
    krylov_columns(&system, y, 1.0 - alpha)
}

fn krylov_columns<A: LinearOperator + ?Sized>(
    system: &A,
    y: &DMatrix<f64>,
    rhs_scale: f64,
) -> Result<EstimateMatrix> {
    let n = system.dim();
    let opts = KrylovOptions::for_dim(n);
    let outcomes: Vec<_> = (0..y.ncols())
        .into_par_iter()
        .map(|j| {
            let b: Vec<f64> = y.column(j).iter().map(|v| v * rhs_scale).collect();
            krylov_solve(system, &b, opts)
        })
        .collect::<Result<Vec<_>>>()?;
    let values = DMatrix::from_fn(n, y.ncols(), |i, j| outcomes[j].x[i]);
    Ok(EstimateMatrix {
        values,
        method: if system.is_symmetric() {
            SolveMethod::ConjugateGradient
        } else {
            SolveMethod::BiCgStab
        },
        iterations: outcomes.iter().map(|o| o.iterations).max().unwrap_or(0),
        residual: outcomes.iter().map(|o| o.rel_residual).fold(0.0, f64::max),
        converged: true,
        change_history: Vec::new(),
    })
}

/// `γ(M+γI)⁻¹Y` for a symmetric positive semi-definite `M`.
fn solve_shifted_dense(m: &DMatrix<f64>, y: &DMatrix<f64>, gamma: f64) -> Result<EstimateMatrix> {
    check_gamma(gamma)?;
    check_square(m)?;
    check_rhs(m.nrows(), y)?;
    let n = m.nrows();
    let system = m + DMatrix::identity(n, n) * gamma;
    let rhs = y * gamma;
    match system.clone().cholesky() {
        Some(chol) => Ok(dense_result(
            chol.solve(&rhs),
            &system,
            &rhs,
            SolveMethod::DenseCholesky,
        )),
        None => {
            // not numerically SPD; fall back to LU so nonsymmetric input still solves
            let values = system
                .clone()
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::Singular(format!("L + γI is singular at γ = {gamma}")))?;
            Ok(dense_result(values, &system, &rhs, SolveMethod::DenseLu))
        }
    }
}

/// `γ(L+γI)⁻¹Y` for an un-normalized (hypergraph or graph) Laplacian.
pub fn solve_unnormalized(
    l: &DMatrix<f64>,
    y: &DMatrix<f64>,
    gamma: f64,
) -> Result<EstimateMatrix> {
    solve_shifted_dense(l, y, gamma)
}

/// `γ(L_sym+γI)⁻¹Y`.
pub fn solve_sym_regularized(
    l_sym: &DMatrix<f64>,
    y: &DMatrix<f64>,
    gamma: f64,
) -> Result<EstimateMatrix> {
    solve_shifted_dense(l_sym, y, gamma)
}

/// Matrix-free `γ(L+γI)⁻¹Y`; `l` may be any symmetric PSD Laplacian operator.
pub fn solve_shifted_krylov<A: LinearOperator + ?Sized>(
    l: &A,
    y: &DMatrix<f64>,
    gamma: f64,
) -> Result<EstimateMatrix> {
    check_gamma(gamma)?;
    check_rhs(l.dim(), y)?;
    let system = Shifted::new(l, gamma, 1.0);
    krylov_columns(&system, y, gamma)
}

/// Per-class signs and single-label predictions read off `F`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    /// `sign(F_ij)` in `{−1, 0, +1}`.
    pub signs: Vec<Vec<i8>>,
    /// Argmax class per sample, ties to the lowest class index.
    pub classes: Vec<usize>,
    /// Samples whose row of `F` is entirely zero.
    pub zero_confidence: Vec<bool>,
}

pub fn predict(f: &DMatrix<f64>) -> Prediction {
    let mut signs = Vec::with_capacity(f.nrows());
    let mut classes = Vec::with_capacity(f.nrows());
    let mut zero_confidence = Vec::with_capacity(f.nrows());
    for row in f.row_iter() {
        signs.push(
            row.iter()
                .map(|&v| {
                    if v > 0.0 {
                        1
                    } else if v < 0.0 {
                        -1
                    } else {
                        0
                    }
                })
                .collect(),
        );
        let mut best = 0;
        for j in 1..row.len() {
            if row[j] > row[best] {
                best = j;
            }
        }
        classes.push(best);
        zero_confidence.push(row.iter().all(|&v| v == 0.0));
    }
    Prediction {
        signs,
        classes,
        zero_confidence,
    }
}

/// Single column as a matrix; convenience for one-class examples.
pub fn column(values: &[f64]) -> DMatrix<f64> {
    DMatrix::from_column_slice(values.len(), 1, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j3() -> DMatrix<f64> {
        DMatrix::from_element(3, 3, 1.0 / 3.0)
    }

    /// Gauss-Jordan inverse, independent of nalgebra's factorizations.
    fn brute_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let mut aug: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let mut r: Vec<f64> = (0..n).map(|j| a[(i, j)]).collect();
                r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
                r
            })
            .collect();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&x, &y| aug[x][c].abs().total_cmp(&aug[y][c].abs()))
                .unwrap();
            aug.swap(c, p);
            let piv = aug[c][c];
            for v in aug[c].iter_mut() {
                *v /= piv;
            }
            for r in 0..n {
                if r != c {
                    let factor = aug[r][c];
                    let pivot_row = aug[c].clone();
                    for (v, pv) in aug[r].iter_mut().zip(pivot_row) {
                        *v -= factor * pv;
                    }
                }
            }
        }
        DMatrix::from_fn(n, n, |i, j| aug[i][n + j])
    }

    #[test]
    fn labels_definition() {
        let y = initial_labels(&[(0, 0)], 3, 2).unwrap();
        assert_eq!(
            y.values(),
            &DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.0, 0.0, 0.0, 0.0])
        );
        let y = initial_labels(&[(0, 0), (1, 1)], 3, 2).unwrap();
        assert_eq!(
            y.values(),
            &DMatrix::from_row_slice(3, 2, &[1.0, -1.0, -1.0, 1.0, 0.0, 0.0])
        );
        assert_eq!(y.labeled(), 2);
        let y = initial_labels(&[], 3, 2).unwrap();
        assert_eq!(y.values(), &DMatrix::zeros(3, 2));
    }

    #[test]
    fn labels_reorder_to_prefix() {
        let y = initial_labels(&[(3, 1), (1, 0)], 4, 2).unwrap();
        assert_eq!(y.order(), &[1, 3, 0, 2]);
        assert_eq!(
            y.values().row(0).iter().copied().collect::<Vec<_>>(),
            vec![1.0, -1.0]
        );
        assert_eq!(
            y.values().row(1).iter().copied().collect::<Vec<_>>(),
            vec![-1.0, 1.0]
        );
        let back = y.to_original_rows(y.values());
        assert_eq!(
            back.row(3).iter().copied().collect::<Vec<_>>(),
            vec![-1.0, 1.0]
        );
        assert_eq!(
            back.row(0).iter().copied().collect::<Vec<_>>(),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn labels_errors() {
        assert!(initial_labels(&[(0, 0), (0, 1)], 3, 2).is_err());
        assert!(initial_labels(&[(0, 2)], 3, 2).is_err());
        assert!(initial_labels(&[(3, 0)], 3, 2).is_err());
    }

    #[test]
    fn triangle_iterative_and_closed() {
        let y = column(&[1.0, 0.0, 0.0]);
        let cfg = SolverConfig {
            alpha: 0.5,
            mode: SolverMode::Iterative,
            ..SolverConfig::default()
        };
        let it = propagate_iterative(&j3(), &y, &cfg).unwrap();
        let closed = solve_propagation_closed(&j3(), &y, 0.5).unwrap();
        let expected = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];
        for (i, e) in expected.iter().enumerate() {
            assert!((closed.values[i] - e).abs() < 1e-12);
            assert!((it.values[i] - e).abs() < 1e-9);
        }
        assert!(it.converged);
    }

    #[test]
    fn zero_labels_give_zero_estimates() {
        let y = DMatrix::zeros(3, 2);
        let cfg = SolverConfig {
            mode: SolverMode::Iterative,
            ..SolverConfig::default()
        };
        assert_eq!(propagate_iterative(&j3(), &y, &cfg).unwrap().values, y);
        assert_eq!(solve_propagation_closed(&j3(), &y, 0.3).unwrap().values, y);
        let l = DMatrix::identity(3, 3) - j3();
        assert_eq!(solve_unnormalized(&l, &y, 1.0).unwrap().values, y);
        assert_eq!(solve_sym_regularized(&l, &y, 1.0).unwrap().values, y);
    }

    #[test]
    fn small_alpha_keeps_labels() {
        let y = column(&[1.0, -1.0, 0.0]);
        let f = solve_propagation_closed(&j3(), &y, 1e-9).unwrap();
        assert!((f.values - y).amax() < 1e-8);
    }

    #[test]
    fn unnormalized_pair_matches_brute_inverse() {
        let l = DMatrix::from_row_slice(2, 2, &[0.5, -0.5, -0.5, 0.5]);
        let y = column(&[1.0, 0.0]);
        let inv = brute_inverse(&(l.clone() + DMatrix::identity(2, 2)));
        let oracle = inv * &y;
        // hand inverse of [[1.5,-.5],[-.5,1.5]] is (1/2)[[1.5,.5],[.5,1.5]]
        assert!((oracle[0] - 0.75).abs() < 1e-15 && (oracle[1] - 0.25).abs() < 1e-15);
        let f = solve_unnormalized(&l, &y, 1.0).unwrap();
        assert!((f.values - oracle).amax() < 1e-14);
        assert!(f.residual < 1e-14);
    }

    #[test]
    fn large_gamma_approaches_labels() {
        let l = DMatrix::identity(3, 3) - j3();
        let y = column(&[1.0, -1.0, 0.0]);
        let f = solve_unnormalized(&l, &y, 1e6).unwrap();
        assert!((f.values - y).amax() <= 1e-5);
    }

    #[test]
    fn sym_regularized_triangle() {
        // D_v = I here, so L_sym = L = I − J/3
        let l = DMatrix::identity(3, 3) - j3();
        let y = column(&[1.0, 0.0, 0.0]);
        let oracle = brute_inverse(&(l.clone() + DMatrix::identity(3, 3))) * &y;
        for (got, want) in oracle.iter().zip([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0]) {
            assert!((got - want).abs() < 1e-14);
        }
        let f = solve_sym_regularized(&l, &y, 1.0).unwrap();
        assert!((f.values - oracle).amax() < 1e-14);
    }

    #[test]
    fn krylov_matches_dense() {
        let s = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.5, 0.25, 0.5, 0.25, 1.0, 0.0, 0.0]);
        let y = DMatrix::from_row_slice(3, 2, &[1.0, -1.0, 0.0, 0.0, -1.0, 1.0]);
        let dense = solve_propagation_closed(&s, &y, 0.9).unwrap();
        let kry = solve_propagation_krylov(&s, &y, 0.9).unwrap();
        assert_eq!(kry.method, SolveMethod::BiCgStab);
        assert!((dense.values - kry.values).amax() < 1e-10);
        let l = DMatrix::identity(3, 3) - j3();
        let a = solve_unnormalized(&l, &y, 0.7).unwrap();
        let b = solve_shifted_krylov(&l, &y, 0.7).unwrap();
        assert_eq!(b.method, SolveMethod::ConjugateGradient);
        assert!((a.values - b.values).amax() < 1e-10);
    }

    #[test]
    fn reports_non_convergence() {
        let y = column(&[1.0, 0.0, 0.0]);
        let cfg = SolverConfig {
            alpha: 0.99,
            max_iterations: 5,
            mode: SolverMode::Iterative,
            ..SolverConfig::default()
        };
        let est = propagate_iterative(&DMatrix::from_element(3, 3, 0.3), &y, &cfg).unwrap();
        assert!(!est.converged);
        assert_eq!(est.iterations, 5);
    }

    #[test]
    fn rejects_invalid_parameters() {
        let y = column(&[1.0, 0.0, 0.0]);
        assert!(solve_propagation_closed(&j3(), &y, 1.0).is_err());
        assert!(solve_propagation_closed(&j3(), &y, 0.0).is_err());
        assert!(solve_unnormalized(&j3(), &y, 0.0).is_err());
        assert!(solve_unnormalized(&j3(), &column(&[1.0]), 1.0).is_err());
    }

    #[test]
    fn predict_rules() {
        let f = DMatrix::from_row_slice(3, 3, &[0.9, -0.2, -0.1, 0.3, 0.3, -1.0, 0.0, 0.0, 0.0]);
        let p = predict(&f);
        assert_eq!(p.signs[0], vec![1, -1, -1]);
        assert_eq!(p.classes, vec![0, 0, 0]);
        assert_eq!(p.signs[2], vec![0, 0, 0]);
        assert_eq!(p.zero_confidence, vec![false, false, true]);
    }
}
