//! Dense symmetric-matrix helpers shared by every other module.
//!
//! Inverses of positive definite matrices always go through a Cholesky
//! factorization; results that must be symmetric are re-symmetrized as
//! `(M + Mᵀ)/2` before they leave this module.

use std::ops::Deref;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Pivot threshold used when accepting a Cholesky factorization.
pub fn eps_pd(m: &DMatrix<f64>) -> f64 {
    let max_diag = m.diagonal().iter().cloned().fold(0.0_f64, f64::max);
    1e-10 * (1.0 + max_diag)
}

/// Slack allowed when deciding `M ⪰ 0` numerically. The Frobenius norm
/// stands in for the spectral norm (it is an upper bound).
pub fn eps_psd(m: &DMatrix<f64>) -> f64 {
    1e-8 * (1.0 + m.norm())
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Symmetric matrix with exactly mirrored entries. The upper triangle is
/// the canonical copy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    /// Builds from the upper triangle of `m`, ignoring the strict lower part.
    pub fn from_upper(mut m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim(m.nrows(), m.ncols()));
        }
        if m.nrows() == 0 {
            return Err(Error::DegenerateInput("matrix order must be at least 1".into()));
        }
        let n = m.nrows();
        for j in 0..n {
            for i in (j + 1)..n {
                m[(i, j)] = m[(j, i)];
            }
        }
        Ok(SymMatrix(m))
    }

    /// Builds from `(m + mᵀ)/2`.
    pub fn symmetrized(m: &DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::dim(m.nrows(), m.ncols()));
        }
        Self::from_upper(symmetrize(m))
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::dim(n, bad.len()));
        }
        Self::from_upper(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn identity(n: usize) -> Self {
        SymMatrix(DMatrix::identity(n, n))
    }

    pub fn zeros(n: usize) -> Self {
        SymMatrix(DMatrix::zeros(n, n))
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        SymMatrix(DMatrix::from_diagonal(&DVector::from_column_slice(d)))
    }

    pub fn order(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_inner(self) -> DMatrix<f64> {
        self.0
    }

    pub fn scale(&self, s: f64) -> Self {
        SymMatrix(&self.0 * s)
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.0.row_iter().map(|r| r.iter().cloned().collect()).collect()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        min_eigenvalue(&self.0)
    }

    pub fn max_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.0.clone()).eigenvalues.max()
    }
}

impl Deref for SymMatrix {
    type Target = DMatrix<f64>;

    fn deref(&self) -> &DMatrix<f64> {
        &self.0
    }
}

impl TryFrom<Vec<Vec<f64>>> for SymMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        SymMatrix::from_rows(&rows)
    }
}

impl From<SymMatrix> for Vec<Vec<f64>> {
    fn from(m: SymMatrix) -> Self {
        m.to_rows()
    }
}

/// Cholesky factorization that additionally rejects pivots at or below
/// [`eps_pd`].
pub fn cholesky(m: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let eps = eps_pd(m);
    let chol = Cholesky::new(m.clone())?;
    let l = chol.l_dirty();
    if (0..m.nrows()).all(|i| l[(i, i)] * l[(i, i)] > eps) {
        Some(chol)
    } else {
        None
    }
}

pub fn logdet_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    2.0 * (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>()
}

pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky(m).ok_or(Error::NotPositiveDefinite)?;
    Ok(symmetrize(&chol.inverse()))
}

pub fn spd_logdet(m: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(m).ok_or(Error::NotPositiveDefinite)?;
    Ok(logdet_from_cholesky(&chol))
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    SymmetricEigen::new(symmetrize(m)).eigenvalues.min()
}

/// `m ⪰ −eps_psd(m)·I`.
pub fn is_psd(m: &DMatrix<f64>) -> bool {
    min_eigenvalue(m) >= -eps_psd(m)
}

/// Moore-Penrose pseudoinverse of a symmetric matrix via its eigenbasis.
pub fn pinv_sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(symmetrize(m));
    let scale = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    let cut = 1e-10 * scale.max(1e-300);
    let inv = eig.eigenvalues.map(|v| if v.abs() > cut { 1.0 / v } else { 0.0 });
    let q = &eig.eigenvectors;
    symmetrize(&(q * DMatrix::from_diagonal(&inv) * q.transpose()))
}

/// Number of free entries of an order-`n` symmetric matrix.
pub fn sym_dim(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Scaled upper-triangle basis: `E_ii` on the diagonal and
/// `(E_ij + E_ji)/√2` off it, in row-major order over `i ≤ j`. The
/// coordinate map is an isometry between the Frobenius and Euclidean
/// inner products.
pub fn sym_basis(n: usize) -> Vec<SymMatrix> {
    let mut out = Vec::with_capacity(sym_dim(n));
    for i in 0..n {
        for j in i..n {
            let mut b = DMatrix::zeros(n, n);
            if i == j {
                b[(i, i)] = 1.0;
            } else {
                b[(i, j)] = std::f64::consts::FRAC_1_SQRT_2;
                b[(j, i)] = std::f64::consts::FRAC_1_SQRT_2;
            }
            out.push(SymMatrix(b));
        }
    }
    out
}

pub fn sym_from_coords(n: usize, y: &[f64]) -> DMatrix<f64> {
    debug_assert_eq!(y.len(), sym_dim(n));
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            if i == j {
                m[(i, i)] = y[k];
            } else {
                let v = y[k] * std::f64::consts::FRAC_1_SQRT_2;
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
            k += 1;
        }
    }
    m
}

pub fn sym_to_coords(m: &DMatrix<f64>) -> Vec<f64> {
    let n = m.nrows();
    let mut y = Vec::with_capacity(sym_dim(n));
    for i in 0..n {
        for j in i..n {
            if i == j {
                y.push(m[(i, i)]);
            } else {
                y.push((m[(i, j)] + m[(j, i)]) * std::f64::consts::FRAC_1_SQRT_2);
            }
        }
    }
    y
}
