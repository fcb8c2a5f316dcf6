//! Thin bridge between `ndarray` storage and `faer` factorizations.

use faer::linalg::solvers::{Llt, PartialPivLu, Solve};
use faer::{Mat, MatRef, Side};
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

use crate::error::{Error, Result};

pub(crate) fn to_faer(a: ArrayView2<f64>) -> Mat<f64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

pub(crate) fn from_faer(m: MatRef<'_, f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    Cholesky,
    Lu,
}

enum Inner {
    Llt(Llt<f64>),
    Lu(PartialPivLu<f64>),
}

/// A reusable factorization of a square system matrix.
pub struct Factorization {
    inner: Inner,
    n: usize,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("kind", &self.kind())
            .field("n", &self.n)
            .finish()
    }
}

impl Factorization {
    /// Cholesky first; partial-pivot LU if the matrix is not numerically
    /// positive definite. Pivots at roundoff level are treated as singular.
    pub fn new(a: ArrayView2<f64>) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n {
            return Err(Error::Shape(format!(
                "system matrix must be square, got {}x{}",
                n,
                a.ncols()
            )));
        }
        if a.iter().any(|v| !v.is_finite()) {
            return Err(Error::Singular("system matrix has non-finite entries".into()));
        }
        let m = to_faer(a);
        let max_diag = (0..n).map(|i| a[(i, i)].abs()).fold(0.0, f64::max);
        let tol = n.max(1) as f64 * f64::EPSILON * max_diag.max(f64::MIN_POSITIVE);

        if let Ok(llt) = m.llt(Side::Lower) {
            let l = llt.L();
            let min_pivot = (0..n).map(|i| l[(i, i)] * l[(i, i)]).fold(f64::INFINITY, f64::min);
            if n == 0 || min_pivot > tol {
                return Ok(Self { inner: Inner::Llt(llt), n });
            }
        }

        let lu = m.partial_piv_lu();
        let u = lu.U();
        let max_u = (0..n).map(|i| u[(i, i)].abs()).fold(0.0, f64::max);
        let min_u = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
        if n > 0 && (min_u <= n as f64 * f64::EPSILON * max_u || !min_u.is_finite()) {
            return Err(Error::Singular(format!(
                "smallest pivot {min_u:.3e} against largest {max_u:.3e} for n = {n}"
            )));
        }
        Ok(Self { inner: Inner::Lu(lu), n })
    }

    pub fn kind(&self) -> FactorKind {
        match self.inner {
            Inner::Llt(_) => FactorKind::Cholesky,
            Inner::Lu(_) => FactorKind::Lu,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: ArrayView2<f64>) -> Result<Array2<f64>> {
        if rhs.nrows() != self.n {
            return Err(Error::Shape(format!(
                "right-hand side has {} rows, system has {}",
                rhs.nrows(),
                self.n
            )));
        }
        let mut x = to_faer(rhs);
        match &self.inner {
            Inner::Llt(f) => f.solve_in_place(x.as_mut()),
            Inner::Lu(f) => f.solve_in_place(x.as_mut()),
        }
        Ok(from_faer(x.as_ref()))
    }

    pub fn solve_vec(&self, rhs: ArrayView1<f64>) -> Result<Array1<f64>> {
        let col = rhs.to_owned().insert_axis(ndarray::Axis(1));
        Ok(self.solve(col.view())?.column(0).to_owned())
    }
}

/// Eigenvalues of a symmetric matrix in nondecreasing order.
pub fn symmetric_eigenvalues(a: ArrayView2<f64>) -> Result<Vec<f64>> {
    to_faer(a)
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Singular(format!("eigenvalue iteration failed: {e:?}")))
}

/// Full symmetric eigendecomposition: eigenvalues nondecreasing, eigenvectors
/// as the columns of the returned matrix.
pub fn symmetric_eigen(a: ArrayView2<f64>) -> Result<(Vec<f64>, Array2<f64>)> {
    let evd = to_faer(a)
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Singular(format!("eigendecomposition failed: {e:?}")))?;
    let s = evd.S();
    let values = (0..a.nrows()).map(|i| s[i]).collect();
    Ok((values, from_faer(evd.U())))
}

/// Dense product through faer's blocked kernels.
pub fn matmul(a: ArrayView2<f64>, b: ArrayView2<f64>) -> Array2<f64> {
    let prod = to_faer(a) * to_faer(b);
    from_faer(prod.as_ref())
}
