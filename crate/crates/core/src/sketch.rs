//! Randomized low-rank decompositions.
//!
//! [`sor_svd`] / [`sor_svd_power`] implement the subspace-orbit scheme: the
//! column sketch `T₁ = AΩ` is pushed back through `Aᵀ` to give the row
//! sketch `T₂ = AᵀT₁`, both are orthonormalized, `A` is compressed from both
//! sides to an `ℓ × ℓ` core `M = Q₁ᵀAQ₂`, and the rank-`k` truncated SVD of the
//! core is lifted back. [`r_svd`] (one-sided) and [`tsr_svd`] (two independent
//! test matrices, single pass) are the baselines.
//!
//! By default every pass is orthonormalized before it is multiplied again
//! (`T₂ = AᵀQ₁` instead of `AᵀT₁`, and so on). `T·R⁻¹` spans the same space as
//! `T`, so the bases are the same as the literal recurrence in exact
//! arithmetic, but powers of `σ_j/σ₁` no longer underflow the working
//! precision on fast-decaying spectra. `SketchConfig::reorthonormalize =
//! false` runs the literal recurrence.

use serde::{Deserialize, Serialize};

use crate::dense::{
    default_pinv_tol, full_svd, gaussian_matrix, matmul, matmul_nt, matmul_tn, orthonormalize,
    pseudo_inverse, singular_values, truncated_svd, Matrix,
};
use crate::error::{Error, Result};

/// Sketch parameters shared by all randomized methods.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SketchConfig {
    /// Sample size `ℓ` (number of sketch columns).
    pub ell: usize,
    /// Power iterations.
    pub q: usize,
    pub seed: u64,
    /// Replace the third data pass by the `M_approx` estimate of the core.
    pub single_pass: bool,
    /// Orthonormalize each sketch before the next multiplication.
    pub reorthonormalize: bool,
}

impl SketchConfig {
    pub fn new(ell: usize, seed: u64) -> Self {
        Self {
            ell,
            q: 0,
            seed,
            single_pass: false,
            reorthonormalize: true,
        }
    }

    pub fn with_power(mut self, q: usize) -> Self {
        self.q = q;
        self
    }

    pub fn with_single_pass(mut self, single_pass: bool) -> Self {
        self.single_pass = single_pass;
        self
    }

    pub fn with_reorthonormalize(mut self, on: bool) -> Self {
        self.reorthonormalize = on;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Sor,
    SorPower,
    Rsvd,
    Tsr,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Sor => "sor",
            Method::SorPower => "sor_power",
            Method::Rsvd => "rsvd",
            Method::Tsr => "tsr",
        }
    }
}

/// Norms in which approximation errors are reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorNorm {
    Frobenius,
    Spectral,
}

/// Factored rank-`k` approximation `U · diag(σ) · Vᵀ` plus run diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct LowRankApprox {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
    pub method: Method,
    /// Passes over the data matrix.
    pub passes: usize,
    pub ell: usize,
    pub q: usize,
    pub seed: u64,
}

impl LowRankApprox {
    pub fn rank(&self) -> usize {
        self.sigma.len()
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(&self, k: usize) -> Result<LowRankApprox> {
        if k == 0 || k > self.rank() {
            return Err(Error::Parameter(format!(
                "cannot truncate rank-{} approximation to {k}",
                self.rank()
            )));
        }
        Ok(LowRankApprox {
            u: self.u.columns(0..k),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.columns(0..k),
            ..self.clone()
        })
    }
}

fn validate(a: &Matrix, k: usize, ell: usize) -> Result<()> {
    let (m, n) = a.shape();
    if m < 2 || n < 2 {
        return Err(Error::Shape(format!("sketching needs at least 2x2, got {m}x{n}")));
    }
    if k == 0 || k > ell {
        return Err(Error::Parameter(format!("need 1 <= k <= ell, got k={k}, ell={ell}")));
    }
    if ell >= m.min(n) {
        return Err(Error::Parameter(format!(
            "sample size ell={ell} must be below min(m, n)={}",
            m.min(n)
        )));
    }
    Ok(())
}

/// Basic SOR-SVD (three passes, or two with `single_pass`). `cfg.q` must be 0.
pub fn sor_svd(a: &Matrix, k: usize, cfg: &SketchConfig) -> Result<LowRankApprox> {
    if cfg.q != 0 {
        return Err(Error::Parameter(format!(
            "sor_svd takes no power iterations (q={}); use sor_svd_power",
            cfg.q
        )));
    }
    sor_svd_power(a, k, cfg)
}

/// SOR-SVD with `cfg.q` power iterations: `2q + 3` passes, or `2q + 2` with
/// `single_pass`. With `q = 0` this is exactly [`sor_svd`].
pub fn sor_svd_power(a: &Matrix, k: usize, cfg: &SketchConfig) -> Result<LowRankApprox> {
    validate(a, k, cfg.ell)?;
    let omega = gaussian_matrix(a.cols(), cfg.ell, cfg.seed);

    // `right` is the n×ℓ block entering the current pass pair; after the
    // loop it is the non-updated T₂ that M_approx needs.
    let mut right = omega;
    let (t1, q1, t2) = loop_passes(a, &mut right, cfg)?;
    let q2 = orthonormalize(&t2)?;

    let core = if cfg.single_pass {
        m_approx(&q1, &t1, &q2, &right)?
    } else {
        matmul_tn(&q1, &matmul(a, &q2)?)?
    };
    let small = truncated_svd(&core, k)?;
    let passes = 2 * cfg.q + if cfg.single_pass { 2 } else { 3 };
    Ok(LowRankApprox {
        u: matmul(&q1, &small.u)?,
        sigma: small.sigma,
        v: matmul(&q2, &small.v)?,
        method: if cfg.q == 0 { Method::Sor } else { Method::SorPower },
        passes,
        ell: cfg.ell,
        q: cfg.q,
        seed: cfg.seed,
    })
}

/// Runs the `q + 1` pass pairs `T₁ = A·right`, `T₂ = Aᵀ·T₁`, leaving `right`
/// at the value used by the last pair. Returns `(T₁, Q₁, T₂)`.
fn loop_passes(a: &Matrix, right: &mut Matrix, cfg: &SketchConfig) -> Result<(Matrix, Matrix, Matrix)> {
    for i in 0..=cfg.q {
        let t1 = matmul(a, right)?;
        let q1 = orthonormalize(&t1)?;
        let t2 = if cfg.reorthonormalize {
            matmul_tn(a, &q1)?
        } else {
            matmul_tn(a, &t1)?
        };
        if i == cfg.q {
            return Ok((t1, q1, t2));
        }
        *right = if cfg.reorthonormalize {
            orthonormalize(&t2)?
        } else {
            t2
        };
    }
    unreachable!("loop returns on its last iteration")
}

/// Single-pass estimate of the core: `M_approx = Q₁ᵀT₁ (Q₂ᵀΩ)†`.
///
/// `omega` is the block `T₁` was computed from. A rank-deficient `Q₂ᵀΩ` is
/// handled by the default pseudo-inverse cutoff.
pub fn m_approx(q1: &Matrix, t1: &Matrix, q2: &Matrix, omega: &Matrix) -> Result<Matrix> {
    if q1.rows() != t1.rows() || q2.rows() != omega.rows() {
        return Err(Error::Shape(format!(
            "M_approx operands Q1 {:?}, T1 {:?}, Q2 {:?}, Omega {:?}",
            q1.shape(),
            t1.shape(),
            q2.shape(),
            omega.shape()
        )));
    }
    let left = matmul_tn(q1, t1)?;
    let mix = matmul_tn(q2, omega)?;
    if left.cols() != mix.cols() {
        return Err(Error::Shape(format!(
            "Q1ᵀT1 is {:?} but Q2ᵀΩ is {:?}",
            left.shape(),
            mix.shape()
        )));
    }
    let pinv = pseudo_inverse(&mix, default_pinv_tol(&mix));
    matmul(&left, &pinv)
}

/// One-sided randomized SVD with `cfg.q` power iterations. Returns all `ℓ`
/// triplets; truncate with [`LowRankApprox::truncate`].
pub fn r_svd(a: &Matrix, cfg: &SketchConfig) -> Result<LowRankApprox> {
    validate(a, cfg.ell, cfg.ell)?;
    let omega = gaussian_matrix(a.cols(), cfg.ell, cfg.seed);
    let mut y = matmul(a, &omega)?;
    for _ in 0..cfg.q {
        y = if cfg.reorthonormalize {
            let w = orthonormalize(&matmul_tn(a, &orthonormalize(&y)?)?)?;
            matmul(a, &w)?
        } else {
            matmul(a, &matmul_tn(a, &y)?)?
        };
    }
    let q = orthonormalize(&y)?;
    let b = matmul_tn(&q, a)?;
    let svd = full_svd(&b);
    Ok(LowRankApprox {
        u: matmul(&q, &svd.u)?,
        sigma: svd.sigma,
        v: svd.v,
        method: Method::Rsvd,
        passes: 2 * cfg.q + 2,
        ell: cfg.ell,
        q: cfg.q,
        seed: cfg.seed,
    })
}

/// Two-sided randomized SVD (single pass). `Ψ₁` uses `cfg.seed` and `Ψ₂`
/// uses `cfg.seed ^ 1`. Returns all `ℓ` triplets. `cfg.q` must be 0.
pub fn tsr_svd(a: &Matrix, cfg: &SketchConfig) -> Result<LowRankApprox> {
    validate(a, cfg.ell, cfg.ell)?;
    if cfg.q != 0 {
        return Err(Error::Parameter("TSR-SVD has no power iterations".into()));
    }
    let (m, n) = a.shape();
    let psi1 = gaussian_matrix(n, cfg.ell, cfg.seed);
    let psi2 = gaussian_matrix(m, cfg.ell, cfg.seed ^ 1);
    let y1 = matmul(a, &psi1)?;
    let y2 = matmul_tn(a, &psi2)?;
    let q1 = orthonormalize(&y1)?;
    let q2 = orthonormalize(&y2)?;
    let b = m_approx(&q1, &y1, &q2, &psi1)?;
    let svd = full_svd(&b);
    Ok(LowRankApprox {
        u: matmul(&q1, &svd.u)?,
        sigma: svd.sigma,
        v: matmul(&q2, &svd.v)?,
        method: Method::Tsr,
        passes: 1,
        ell: cfg.ell,
        q: 0,
        seed: cfg.seed,
    })
}

/// `U · diag(σ) · Vᵀ`.
pub fn reconstruct(x: &LowRankApprox) -> Matrix {
    matmul_nt(&x.u.scale_columns(&x.sigma), &x.v).expect("factor shapes are consistent")
}

/// `‖A − reconstruct(x)‖` in the requested norm.
pub fn approx_error(a: &Matrix, x: &LowRankApprox, kind: ErrorNorm) -> Result<f64> {
    if a.rows() != x.u.rows() || a.cols() != x.v.rows() {
        return Err(Error::Shape(format!(
            "matrix is {:?} but approximation is {}x{}",
            a.shape(),
            x.u.rows(),
            x.v.rows()
        )));
    }
    let residual = a.sub(&reconstruct(x))?;
    Ok(match kind {
        ErrorNorm::Frobenius => residual.frobenius_norm(),
        ErrorNorm::Spectral => singular_values(&residual)[0],
    })
}

/// Pass/flop accounting variants.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlopVariant {
    /// Basic SOR-SVD, three passes.
    Sor3Pass,
    /// Basic SOR-SVD with `M_approx`, two passes.
    Sor2Pass,
    /// Power method, `2q + 3` passes.
    SorPower2q3,
    /// Power method with `M_approx`, `2q + 2` passes.
    SorPower2q2,
}

/// Leading-order flop count with a matrix–vector product costing `2mn`.
pub fn flop_estimate(m: u64, n: u64, ell: u64, k: u64, q: u64, variant: FlopVariant) -> u128 {
    let (m, n, ell, k, q) = (m as u128, n as u128, ell as u128, k as u128, q as u128);
    let c_mult = 2 * m * n;
    let three_pass_tail = 2 * ell * (m + n) * (ell + k) + 2 * ell * ell * (m + ell);
    let two_pass_tail = 2 * ell * (m + n) * (2 * ell + k) + 5 * ell * ell * ell;
    match variant {
        FlopVariant::Sor3Pass => 3 * ell * c_mult + three_pass_tail,
        FlopVariant::Sor2Pass => 2 * ell * c_mult + two_pass_tail,
        FlopVariant::SorPower2q3 => (2 * q + 3) * ell * c_mult + three_pass_tail,
        FlopVariant::SorPower2q2 => (2 * q + 2) * ell * c_mult + two_pass_tail,
    }
}
