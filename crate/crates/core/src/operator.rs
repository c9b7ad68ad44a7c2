//! Linear operators and the Krylov solvers used when matrices are not
//! materialized.
//!
//! Every solver in this crate is written against [`LinearOperator`], so a
//! dense `DMatrix` and a matrix-free hypergraph or graph operator are
//! interchangeable wherever only products are needed.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// A square linear map `x -> A x`.
pub trait LinearOperator: Sync {
    fn dim(&self) -> usize;

    /// Writes `A x` into `out`. Both slices have length `dim()`.
    fn apply(&self, x: &[f64], out: &mut [f64]);

    /// Whether `A` is symmetric; selects CG over BiCGSTAB.
    fn is_symmetric(&self) -> bool {
        false
    }

    /// `A X` for a block of columns, computed column by column in parallel.
    fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let n = x.nrows();
        let cols: Vec<Vec<f64>> = (0..x.ncols())
            .into_par_iter()
            .map(|j| {
                let mut out = vec![0.0; n];
                self.apply(x.column(j).as_slice(), &mut out);
                out
            })
            .collect();
        DMatrix::from_fn(n, x.ncols(), |i, j| cols[j][i])
    }
}

impl LinearOperator for DMatrix<f64> {
    fn dim(&self) -> usize {
        self.nrows()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        let (rows, cols) = self.shape();
        debug_assert_eq!(cols, x.len());
        out.iter_mut().for_each(|o| *o = 0.0);
        // column-major: accumulate column by column
        for (j, &xj) in x.iter().enumerate().take(cols) {
            if xj == 0.0 {
                continue;
            }
            let col = self.column(j);
            for i in 0..rows {
                out[i] += col[i] * xj;
            }
        }
    }

    fn is_symmetric(&self) -> bool {
        let n = self.nrows();
        if n != self.ncols() {
            return false;
        }
        (0..n).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }

    fn apply_matrix(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        self * x
    }
}

/// `diag_scale * x + op_scale * A x`, the shifted systems every closed form
/// reduces to (`I - αS`, `L + γI`, `L_sym + γI`).
pub struct Shifted<'a, A: LinearOperator + ?Sized> {
    pub op: &'a A,
    pub diag_scale: f64,
    pub op_scale: f64,
}

impl<'a, A: LinearOperator + ?Sized> Shifted<'a, A> {
    pub fn new(op: &'a A, diag_scale: f64, op_scale: f64) -> Self {
        Self {
            op,
            diag_scale,
            op_scale,
        }
    }
}

impl<A: LinearOperator + ?Sized> LinearOperator for Shifted<'_, A> {
    fn dim(&self) -> usize {
        self.op.dim()
    }

    fn apply(&self, x: &[f64], out: &mut [f64]) {
        self.op.apply(x, out);
        for (o, &xi) in out.iter_mut().zip(x) {
            *o = self.diag_scale * xi + self.op_scale * *o;
        }
    }

    fn is_symmetric(&self) -> bool {
        self.op.is_symmetric()
    }
}

/// Applies an operator to a vector, allocating the output.
pub fn apply_vec<A: LinearOperator + ?Sized>(op: &A, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; op.dim()];
    op.apply(x, &mut out);
    out
}

/// Materializes an operator column by column. Only sensible for small `dim()`.
pub fn to_dense<A: LinearOperator + ?Sized>(op: &A) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        m.column_mut(j).copy_from_slice(&col);
        e[j] = 0.0;
    }
    m
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Target for `‖b - Ax‖₂ / ‖b‖₂`.
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl KrylovOptions {
    pub fn for_dim(n: usize) -> Self {
        Self {
            rel_tol: 1e-12,
            max_iter: 20 * n + 1000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true relative residual `‖b - Ax‖₂ / ‖b‖₂` (0 when `b = 0`).
    pub rel_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn true_residual<A: LinearOperator + ?Sized>(op: &A, x: &[f64], b: &[f64]) -> f64 {
    let ax = apply_vec(op, x);
    let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
    norm(&r)
}

/// Conjugate gradient for symmetric positive definite operators.
pub fn conjugate_gradient<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    opts: KrylovOptions,
) -> Result<KrylovOutcome> {
    let n = op.dim();
    check_len(n, b.len())?;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rs_old = dot(&r, &r);
    let target = opts.rel_tol * b_norm;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if rs_old.sqrt() <= target {
            // recursive residual drifts; confirm before returning
            let res = true_residual(op, &x, b);
            if res <= target {
                return Ok(KrylovOutcome {
                    x,
                    iterations,
                    rel_residual: res / b_norm,
                });
            }
            let ax = apply_vec(op, &x);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            p.copy_from_slice(&r);
            rs_old = dot(&r, &r);
        }
        op.apply(&p, &mut ap);
        let p_ap = dot(&p, &ap);
        if p_ap <= 0.0 || !p_ap.is_finite() {
            return Err(Error::Singular(format!(
                "conjugate gradient met non-positive curvature {p_ap:e}; operator is not SPD"
            )));
        }
        let step = rs_old / p_ap;
        for i in 0..n {
            x[i] += step * p[i];
            r[i] -= step * ap[i];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs_old;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        rs_old = rs_new;
        iterations += 1;
    }

    let res = true_residual(op, &x, b);
    if res <= target {
        return Ok(KrylovOutcome {
            x,
            iterations,
            rel_residual: res / b_norm,
        });
    }
    Err(Error::KrylovStalled {
        iterations,
        residual: res / b_norm,
    })
}

/// BiCGSTAB for general nonsymmetric operators.
pub fn bicgstab<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    opts: KrylovOptions,
) -> Result<KrylovOutcome> {
    let n = op.dim();
    check_len(n, b.len())?;
    let b_norm = norm(b);
    if b_norm == 0.0 {
        return Ok(KrylovOutcome {
            x: vec![0.0; n],
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let target = opts.rel_tol * b_norm;
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut iterations = 0;

    while iterations < opts.max_iter {
        if norm(&r) <= target {
            let res = true_residual(op, &x, b);
            if res <= target {
                return Ok(KrylovOutcome {
                    x,
                    iterations,
                    rel_residual: res / b_norm,
                });
            }
            // restart from the true residual
            let ax = apply_vec(op, &x);
            r = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
            r_hat.copy_from_slice(&r);
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || !rho_new.is_finite() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        op.apply(&p, &mut v);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 || !denom.is_finite() {
            break;
        }
        alpha = rho_new / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        iterations += 1;
        if norm(&s) <= target {
            for i in 0..n {
                x[i] += alpha * p[i];
            }
            r.copy_from_slice(&s);
            rho = rho_new;
            continue;
        }
        op.apply(&s, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * p[i] + omega * s[i];
            r[i] = s[i] - omega * t[i];
        }
        rho = rho_new;
        if omega == 0.0 {
            break;
        }
    }

    let res = true_residual(op, &x, b);
    if res <= target {
        return Ok(KrylovOutcome {
            x,
            iterations,
            rel_residual: res / b_norm,
        });
    }
    Err(Error::KrylovStalled {
        iterations,
        residual: res / b_norm,
    })
}

/// CG when the operator reports symmetry, BiCGSTAB otherwise.
pub fn krylov_solve<A: LinearOperator + ?Sized>(
    op: &A,
    b: &[f64],
    opts: KrylovOptions,
) -> Result<KrylovOutcome> {
    if op.is_symmetric() {
        conjugate_gradient(op, b, opts)
    } else {
        bicgstab(op, b, opts)
    }
}

fn check_len(n: usize, got: usize) -> Result<()> {
    if n != got {
        return Err(Error::ShapeMismatch {
            expected: format!("right-hand side of length {n}"),
            actual: format!("length {got}"),
        });
    }
    Ok(())
}
