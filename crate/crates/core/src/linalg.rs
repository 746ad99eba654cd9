//! Sparse linear algebra: triplet assembly, direct factorizations, the
//! bordered saddle-point solve, dual-norm evaluations and the small
//! iterative kernels (PCG, inverse power iteration).
//!
//! Factorizations are delegated to `faer`. Its global parallelism is
//! pinned to sequential the first time any factorization is built, so
//! results are bitwise reproducible for any `ERHEO_THREADS` setting; the
//! element-level parallelism of the assembly is unaffected.

use crate::error::{Error, Result};
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::sync::Once;

fn pin_sequential() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Sparse matrix under assembly, in coordinate form. Duplicate entries
/// accumulate.
#[derive(Debug, Clone)]
pub struct CooMat {
    pub nrows: usize,
    pub ncols: usize,
    triplets: Vec<Triplet<usize, usize, f64>>,
}

impl CooMat {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        CooMat { nrows, ncols, triplets: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, val: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if val != 0.0 {
            self.triplets.push(Triplet::new(row, col, val));
        }
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    /// y = A x, accumulated in triplet order.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for t in &self.triplets {
            y[t.row] += t.val * x[t.col];
        }
        y
    }

    /// y = A^T x.
    pub fn mul_vec_transposed(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows);
        let mut y = vec![0.0; self.ncols];
        for t in &self.triplets {
            y[t.col] += t.val * x[t.row];
        }
        y
    }

    /// Keeps the entries whose row and column survive the index maps
    /// (`usize::MAX` marks dropped indices) and renumbers them.
    pub fn restrict(
        &self,
        row_map: &[usize],
        new_nrows: usize,
        col_map: &[usize],
        new_ncols: usize,
    ) -> CooMat {
        let mut out = CooMat::new(new_nrows, new_ncols);
        for t in &self.triplets {
            let r = row_map[t.row];
            let c = col_map[t.col];
            if r != usize::MAX && c != usize::MAX {
                out.push(r, c, t.val);
            }
        }
        out
    }

    pub fn to_sparse(&self) -> Result<SparseColMat<usize, f64>> {
        pin_sequential();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &self.triplets)
            .map_err(|e| Error::Internal(format!("sparse assembly failed: {e:?}")))
    }
}

fn vec_to_mat(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

fn mat_to_vec(m: &Mat<f64>) -> Vec<f64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

/// Sparse LU with partial pivoting; handles the indefinite saddle blocks.
pub struct SparseLu {
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
    n: usize,
}

impl SparseLu {
    pub fn new(a: &CooMat) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Internal("LU needs a square matrix".into()));
        }
        pin_sequential();
        let sp = a.to_sparse()?;
        let lu = sp
            .sp_lu()
            .map_err(|e| Error::Singular(format!("sparse LU factorization failed: {e:?}")))?;
        Ok(SparseLu { lu, n: a.nrows })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        let x = self.lu.solve(&vec_to_mat(rhs));
        let out = mat_to_vec(&x);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(
                "direct solve produced non-finite values; the system is singular".into(),
            ));
        }
        Ok(out)
    }
}

/// Sparse Cholesky for symmetric positive definite matrices (mass,
/// stiffness and strain-product Gram matrices).
pub struct SparseChol {
    chol: faer::sparse::linalg::solvers::Llt<usize, f64>,
    n: usize,
}

impl SparseChol {
    pub fn new(a: &CooMat) -> Result<Self> {
        if a.nrows != a.ncols {
            return Err(Error::Internal("Cholesky needs a square matrix".into()));
        }
        pin_sequential();
        let sp = a.to_sparse()?;
        let chol = sp
            .sp_cholesky(faer::Side::Lower)
            .map_err(|e| Error::Singular(format!("Cholesky factorization failed: {e:?}")))?;
        Ok(SparseChol { chol, n: a.nrows })
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        assert_eq!(rhs.len(), self.n);
        let x = self.chol.solve(&vec_to_mat(rhs));
        let out = mat_to_vec(&x);
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular(
                "Cholesky solve produced non-finite values".into(),
            ));
        }
        Ok(out)
    }

    /// sqrt(r^T A^{-1} r): the dual norm of a functional given through its
    /// coefficient vector, with this factorization as the Riesz map.
    pub fn dual_norm(&self, r: &[f64]) -> Result<f64> {
        let z = self.solve(r)?;
        let sq: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        // Round-off can push a tiny positive quantity below zero.
        Ok(sq.max(0.0).sqrt())
    }
}

/// Factorized saddle-point system
///
/// ```text
/// [ A  -B^T  0 ] [v]   [f]
/// [ B   0    m ] [p] = [g]
/// [ 0  m^T   0 ] [y]   [0]
/// ```
///
/// The third row/column is present only with a gauge vector `m` (the
/// pressure mean weights); it pins m^T p = 0 and absorbs incompatible
/// right-hand sides into the multiplier y.
pub struct SaddleSystem {
    lu: SparseLu,
    pub nv: usize,
    pub np: usize,
    gauged: bool,
}

impl SaddleSystem {
    pub fn new(a: &CooMat, b: &CooMat, gauge: Option<&[f64]>) -> Result<Self> {
        let nv = a.nrows;
        let np = b.nrows;
        if a.ncols != nv || b.ncols != nv {
            return Err(Error::Internal("saddle blocks have mismatched sizes".into()));
        }
        let n = nv + np + if gauge.is_some() { 1 } else { 0 };
        let mut m = CooMat::new(n, n);
        for t in &a.triplets {
            m.push(t.row, t.col, t.val);
        }
        for t in &b.triplets {
            m.push(nv + t.row, t.col, t.val);
            m.push(t.col, nv + t.row, -t.val);
        }
        if let Some(w) = gauge {
            assert_eq!(w.len(), np);
            for (q, &wq) in w.iter().enumerate() {
                m.push(nv + q, nv + np, wq);
                m.push(nv + np, nv + q, wq);
            }
        }
        Ok(SaddleSystem { lu: SparseLu::new(&m)?, nv, np, gauged: gauge.is_some() })
    }

    /// Returns (v, p, gauge multiplier). The multiplier is zero up to
    /// round-off when the data is compatible.
    pub fn solve(&self, f: &[f64], g: &[f64]) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        assert_eq!(f.len(), self.nv);
        assert_eq!(g.len(), self.np);
        let n = self.nv + self.np + if self.gauged { 1 } else { 0 };
        let mut rhs = vec![0.0; n];
        rhs[..self.nv].copy_from_slice(f);
        rhs[self.nv..self.nv + self.np].copy_from_slice(g);
        let sol = self.lu.solve(&rhs)?;
        let v = sol[..self.nv].to_vec();
        let p = sol[self.nv..self.nv + self.np].to_vec();
        let y = if self.gauged { sol[self.nv + self.np] } else { 0.0 };
        Ok((v, p, y))
    }
}

/// Preconditioned conjugate gradients for an SPD operator given as a
/// closure. Returns the solution; errors if the residual fails to drop
/// below `tol * ||b||` within `max_iter` steps.
pub fn pcg(
    apply: impl Fn(&[f64]) -> Result<Vec<f64>>,
    precond: impl Fn(&[f64]) -> Result<Vec<f64>>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let dot = |a: &[f64], c: &[f64]| -> f64 { a.iter().zip(c).map(|(x, y)| x * y).sum() };
    let norm_b = dot(b, b).sqrt();
    if norm_b == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = precond(&r)?;
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..max_iter {
        let ap = apply(&p)?;
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            return Err(Error::Singular(
                "conjugate gradients met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= tol * norm_b {
            return Ok(x);
        }
        z = precond(&r)?;
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::non_convergence("conjugate gradient solve", max_iter, vec![], None))
}

/// Smallest eigenvalue of the pencil K q = lambda M q for SPD K and M, by
/// inverse power iteration: q <- K^{-1} M q, normalized in M. `solve_k`
/// applies K^{-1} (possibly only approximately, e.g. via PCG), `apply_k`
/// and `apply_m` apply the matrices. Deterministic for a fixed start.
pub fn smallest_pencil_eigenvalue(
    solve_k: impl Fn(&[f64]) -> Result<Vec<f64>>,
    apply_k: impl Fn(&[f64]) -> Result<Vec<f64>>,
    apply_m: impl Fn(&[f64]) -> Result<Vec<f64>>,
    start: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<f64> {
    let dot = |a: &[f64], c: &[f64]| -> f64 { a.iter().zip(c).map(|(x, y)| x * y).sum() };
    let mut q = start.to_vec();
    let mq = apply_m(&q)?;
    let nrm = dot(&q, &mq).sqrt();
    if !(nrm > 0.0) {
        return Err(Error::InvalidInput("eigen iteration started from a null vector".into()));
    }
    for v in q.iter_mut() {
        *v /= nrm;
    }
    let mut lambda_prev = f64::INFINITY;
    for it in 0..max_iter {
        let mq = apply_m(&q)?;
        let z = solve_k(&mq)?;
        let mz = apply_m(&z)?;
        let nrm = dot(&z, &mz).sqrt();
        if !(nrm > 0.0 && nrm.is_finite()) {
            return Err(Error::Singular("inverse power iteration degenerated".into()));
        }
        let q_next: Vec<f64> = z.iter().map(|v| v / nrm).collect();
        let kq = apply_k(&q_next)?;
        let mq2 = apply_m(&q_next)?;
        let lambda = dot(&q_next, &kq) / dot(&q_next, &mq2);
        q = q_next;
        if (lambda - lambda_prev).abs() <= tol * lambda.abs().max(1e-300) {
            return Ok(lambda);
        }
        lambda_prev = lambda;
        let _ = it;
    }
    Ok(lambda_prev)
}
