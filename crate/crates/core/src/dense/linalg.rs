//! Deterministic factorizations and norms.
//!
//! Householder QR and Golub–Kahan SVD come from `nalgebra`; this module owns
//! the conventions layered on top (thin shapes, sign canonicalization,
//! stable descending order, pseudo-inverse cutoff).

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::matrix::{matmul_nt, Matrix};
use crate::error::{Error, Result};

/// Thin QR factors: `q` is `m × n` with orthonormal columns, `r` is `n × n`
/// upper triangular with a nonnegative diagonal.
#[derive(Clone, Debug)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
}

/// Singular triplets in descending order of `sigma`.
///
/// Signs are canonical: the largest-magnitude entry of every left singular
/// vector is positive (first such entry on ties).
#[derive(Clone, Debug)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    /// `U · diag(σ) · Vᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        matmul_nt(&self.u.scale_columns(&self.sigma), &self.v).expect("conformable factors")
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdFactors {
        SvdFactors {
            u: self.u.columns(0..k),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.columns(0..k),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    Frobenius,
    Spectral,
    Nuclear,
    L1Elementwise,
}

fn to_nalgebra(a: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

fn from_nalgebra(m: &DMatrix<f64>) -> Matrix {
    let (rows, cols) = m.shape();
    let mut data = Vec::with_capacity(rows * cols);
    for i in 0..rows {
        for j in 0..cols {
            data.push(m[(i, j)]);
        }
    }
    Matrix::from_vec_unchecked(rows, cols, data)
}

/// Householder thin QR of a matrix with `rows ≥ cols`.
pub fn thin_qr(a: &Matrix) -> Result<QrFactors> {
    if a.rows() < a.cols() {
        return Err(Error::Shape(format!(
            "thin QR needs rows >= cols, got {}x{}",
            a.rows(),
            a.cols()
        )));
    }
    let qr = to_nalgebra(a).qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    Ok(QrFactors {
        q: from_nalgebra(&q),
        r: from_nalgebra(&r),
    })
}

/// Orthonormal basis of the column space of `a` (the `Q` of [`thin_qr`]).
pub fn orthonormalize(a: &Matrix) -> Result<Matrix> {
    thin_qr(a).map(|f| f.q)
}

/// Complete economy SVD: `min(rows, cols)` triplets.
pub fn full_svd(a: &Matrix) -> SvdFactors {
    let svd = to_nalgebra(a).svd(true, true);
    let u = svd.u.expect("left vectors requested");
    let v_t = svd.v_t.expect("right vectors requested");
    let r = svd.singular_values.len();

    let mut order: Vec<usize> = (0..r).collect();
    // Stable: equal values keep the factorization's order.
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));

    let (m, n) = a.shape();
    let mut uu = Matrix::zeros(m, r);
    let mut vv = Matrix::zeros(n, r);
    let mut sigma = Vec::with_capacity(r);
    for (dst, &src) in order.iter().enumerate() {
        sigma.push(svd.singular_values[src].max(0.0));
        let col = u.column(src);
        let mut pivot = 0;
        for i in 1..m {
            if col[i].abs() > col[pivot].abs() {
                pivot = i;
            }
        }
        let sign = if col[pivot] < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            uu.set(i, dst, sign * col[i]);
        }
        for i in 0..n {
            vv.set(i, dst, sign * v_t[(src, i)]);
        }
    }
    SvdFactors { u: uu, sigma, v: vv }
}

/// Leading `k` triplets of [`full_svd`].
pub fn truncated_svd(a: &Matrix, k: usize) -> Result<SvdFactors> {
    let r = a.rows().min(a.cols());
    if k == 0 || k > r {
        return Err(Error::Parameter(format!(
            "truncation rank {k} outside 1..={r}"
        )));
    }
    Ok(full_svd(a).truncate(k))
}

/// Singular values only, descending.
pub fn singular_values(a: &Matrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_nalgebra(a)
        .singular_values()
        .iter()
        .map(|v| v.max(0.0))
        .collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Default rank cutoff for [`pseudo_inverse`]: `max(m, n) · ε`.
pub fn default_pinv_tol(a: &Matrix) -> f64 {
    a.rows().max(a.cols()) as f64 * f64::EPSILON
}

/// Moore–Penrose pseudo-inverse, discarding `σ_i ≤ tol · σ₁`.
pub fn pseudo_inverse(a: &Matrix, tol: f64) -> Matrix {
    let svd = full_svd(a);
    let cutoff = tol * svd.sigma.first().copied().unwrap_or(0.0);
    let inv: Vec<f64> = svd
        .sigma
        .iter()
        .map(|&s| if s > cutoff && s > 0.0 { 1.0 / s } else { 0.0 })
        .collect();
    matmul_nt(&svd.v.scale_columns(&inv), &svd.u).expect("conformable factors")
}

pub fn norm(a: &Matrix, kind: NormKind) -> f64 {
    match kind {
        NormKind::Frobenius => a.frobenius_norm(),
        NormKind::Spectral => singular_values(a).first().copied().unwrap_or(0.0),
        NormKind::Nuclear => singular_values(a).iter().sum(),
        NormKind::L1Elementwise => a.as_slice().iter().map(|v| v.abs()).sum(),
    }
}

/// `‖QᵀQ − I‖_F`.
pub fn orthonormality_defect(q: &Matrix) -> f64 {
    let g = super::matrix::matmul_tn(q, q).expect("square gram");
    g.sub(&Matrix::identity(q.cols())).expect("same shape").frobenius_norm()
}
