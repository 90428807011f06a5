//! Deterministic and average-case error bounds for the SOR-SVD sketch.
//!
//! All bound functions take the spectrum of `A` padded with zeros to length
//! `n` (the number of columns), so that `σ_{ℓ−p+1}` is always defined.
//! Indices in the docs are 1-based; `sigma[j - 1]` holds `σ_j`.
//!
//! The split of the test matrix `Ω` against the right singular vectors
//! `V = [V₁ V₂]` of `A` (`V₁` holding the leading `ℓ − p` columns) gives
//! `Ω₁ = V₁ᵀΩ` and `Ω₂ = V₂ᵀΩ`. The deterministic bounds depend on `Ω` only
//! through `Φ = ‖Ω₂‖₂²‖Ω₁†‖₂²`.

use std::f64::consts::E;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dense::{full_svd, gaussian_matrix, matmul_tn, singular_values, Matrix};
use crate::error::{Error, Result};
use crate::sketch::{approx_error, sor_svd_power, ErrorNorm, SketchConfig};

/// Slack, relative to `σ₁`, allowed when checking a bound against a realized value.
pub const BOUND_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundParams {
    pub k: usize,
    pub ell: usize,
    /// Analysis split: `V₁` keeps `ℓ − p` columns.
    pub p: usize,
    pub q: usize,
}

impl BoundParams {
    pub fn new(k: usize, ell: usize, p: usize, q: usize) -> Self {
        Self { k, ell, p, q }
    }

    /// Checks `k ≥ 1`, `2 ≤ p + k ≤ ℓ` and `ℓ < n`.
    pub fn validate(&self, n: usize) -> Result<()> {
        let BoundParams { k, ell, p, .. } = *self;
        if k == 0 {
            return Err(Error::Parameter("k must be positive".into()));
        }
        if p + k < 2 || p + k > ell {
            return Err(Error::Parameter(format!(
                "need 2 <= p + k <= ell, got k={k}, p={p}, ell={ell}"
            )));
        }
        if ell >= n {
            return Err(Error::Parameter(format!("ell={ell} must be below n={n}")));
        }
        Ok(())
    }

    fn validate_average(&self, n: usize) -> Result<()> {
        self.validate(n)?;
        if self.p < 2 {
            return Err(Error::Parameter(format!(
                "average-case bounds need p >= 2, got {}",
                self.p
            )));
        }
        Ok(())
    }

    /// Index (0-based) of `σ_{ℓ−p+1}`.
    fn tail_index(&self) -> usize {
        self.ell - self.p
    }
}

/// Admissible split parameters for average-case evaluation: `2..=ℓ−k`.
pub fn admissible_p(k: usize, ell: usize) -> std::ops::RangeInclusive<usize> {
    2..=ell.saturating_sub(k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct OmegaSplit {
    pub omega1: Matrix,
    pub omega2: Matrix,
    /// `‖Ω₂‖₂`.
    pub norm_omega2: f64,
    /// `‖Ω₁†‖₂`; infinite when `Ω₁` is rank deficient.
    pub norm_omega1_pinv: f64,
    pub full_row_rank: bool,
}

impl OmegaSplit {
    /// `Φ = ‖Ω₂‖₂²‖Ω₁†‖₂²`.
    pub fn phi(&self) -> f64 {
        (self.norm_omega2 * self.norm_omega1_pinv).powi(2)
    }
}

/// Splits `Ω` against the right singular vectors `v` (`n × n`).
pub fn omega_split(v: &Matrix, omega: &Matrix, params: &BoundParams) -> Result<OmegaSplit> {
    let n = v.rows();
    if v.cols() != n || omega.rows() != n || omega.cols() != params.ell {
        return Err(Error::Shape(format!(
            "need V n×n and Omega n×ell, got V {:?}, Omega {:?}, ell={}",
            v.shape(),
            omega.shape(),
            params.ell
        )));
    }
    params.validate(n)?;
    split_projection(&matmul_tn(v, omega)?, params)
}

/// Splits a precomputed `VᵀΩ` at row `ℓ − p`.
pub fn split_projection(vt_omega: &Matrix, params: &BoundParams) -> Result<OmegaSplit> {
    let n = vt_omega.rows();
    params.validate(n)?;
    let cut = params.tail_index();
    let omega1 = vt_omega.row_block(0..cut);
    let omega2 = vt_omega.row_block(cut..n);
    let s1 = singular_values(&omega1);
    let (smax, smin) = (s1[0], s1[s1.len() - 1]);
    let full_row_rank = smin > n as f64 * f64::EPSILON * smax;
    let norm_omega1_pinv = if full_row_rank { 1.0 / smin } else { f64::INFINITY };
    let norm_omega2 = singular_values(&omega2)[0];
    Ok(OmegaSplit {
        omega1,
        omega2,
        norm_omega2,
        norm_omega1_pinv,
        full_row_rank,
    })
}

fn check_spectrum(sigma: &[f64], params: &BoundParams) -> Result<()> {
    params.validate(sigma.len())?;
    if sigma.windows(2).any(|w| w[0] < w[1]) || sigma.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::Parameter("spectrum must be nonnegative and nonincreasing".into()));
    }
    Ok(())
}

fn require_full_rank(split: &OmegaSplit) -> Result<()> {
    if split.full_row_rank {
        Ok(())
    } else {
        Err(Error::BoundInapplicable("Omega_1 is not full row rank".into()))
    }
}

/// `σ_j / √(1 + c·(σ_{ℓ−p+1}/σ_j)^{4q+4})` for `j = 1..k`.
fn sv_lower(sigma: &[f64], params: &BoundParams, c: f64) -> Vec<f64> {
    let tail = sigma[params.tail_index()];
    let exp = 4 * params.q as i32 + 4;
    sigma[..params.k]
        .iter()
        .map(|&s| {
            if s == 0.0 {
                return 0.0;
            }
            let g = (tail / s).powi(exp);
            s / (1.0 + c * g).sqrt()
        })
        .collect()
}

/// Per-realization lower bounds on the first `k` sketched singular values.
pub fn det_sv_lower_bound(sigma: &[f64], params: &BoundParams, split: &OmegaSplit) -> Result<Vec<f64>> {
    check_spectrum(sigma, params)?;
    require_full_rank(split)?;
    Ok(sv_lower(sigma, params, split.phi()))
}

/// `‖A − A_k‖` in the requested norm, from the spectrum.
pub fn optimal_error(sigma: &[f64], k: usize, kind: ErrorNorm) -> f64 {
    match kind {
        ErrorNorm::Frobenius => sigma.iter().skip(k).map(|s| s * s).sum::<f64>().sqrt(),
        ErrorNorm::Spectral => sigma.get(k).copied().unwrap_or(0.0),
    }
}

/// Which expression is used for `τ` when `q ≥ 1`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauForm {
    /// `τ = β/σ_{ℓ−p+1}`.
    #[default]
    Printed,
    /// `τ = σ_k·β/σ_{ℓ−p+1}`, i.e. the `η` term divided by `√k·σ₁`, which
    /// keeps the bound scale-equivariant.
    Derived,
}

/// The four coefficients `(α, β, η, τ)` of the deterministic low-rank bound.
///
/// With `s = σ_{ℓ−p+1}` and `r = (s/σ_k)^{2q}`:
/// `α = √k s² r/σ_k`, `β = s² r/(σ₁σ_k)`, and for `q = 0` `η = √k s`,
/// `τ = s/σ₁`, while for `q ≥ 1` `η = (σ_k/s)α` and `τ` follows `form`. The
/// power forms are evaluated after cancelling `s` so that `s = 0` gives zeros.
pub fn lowrank_coefficients(sigma: &[f64], params: &BoundParams, form: TauForm) -> (f64, f64, f64, f64) {
    let s = sigma[params.tail_index()];
    let s1 = sigma[0];
    let sk = sigma[params.k - 1];
    if s == 0.0 {
        return (0.0, 0.0, 0.0, 0.0);
    }
    let rk = (params.k as f64).sqrt();
    let r = (s / sk).powi(2 * params.q as i32);
    let alpha = rk * s * s / sk * r;
    let beta = s * s / (s1 * sk) * r;
    if params.q == 0 {
        return (alpha, beta, rk * s, s / s1);
    }
    let tau = match form {
        TauForm::Printed => s / (s1 * sk) * r,
        TauForm::Derived => s / s1 * r,
    };
    (alpha, beta, rk * s * r, tau)
}

/// Per-realization upper bound on `‖A − Â‖` (Frobenius or spectral first term).
pub fn det_lowrank_bound(
    sigma: &[f64],
    params: &BoundParams,
    split: &OmegaSplit,
    kind: ErrorNorm,
) -> Result<f64> {
    det_lowrank_bound_with(sigma, params, split, kind, TauForm::Printed)
}

pub fn det_lowrank_bound_with(
    sigma: &[f64],
    params: &BoundParams,
    split: &OmegaSplit,
    kind: ErrorNorm,
    form: TauForm,
) -> Result<f64> {
    check_spectrum(sigma, params)?;
    require_full_rank(split)?;
    let phi = split.phi();
    let (alpha, beta, eta, tau) = lowrank_coefficients(sigma, params, form);
    let term = |a: f64, b: f64| {
        if a == 0.0 {
            0.0
        } else {
            (a * a * phi / (1.0 + b * b * phi)).sqrt()
        }
    };
    Ok(optimal_error(sigma, params.k, kind) + term(alpha, beta) + term(eta, tau))
}

/// `(ν₁, ν₂)` with `ν₁ = √(n−ℓ+p) + √ℓ + 7` and `ν₂ = 4e√ℓ/(p+1)`.
pub fn nu_constants(n: usize, ell: usize, p: usize) -> (f64, f64) {
    let nu1 = ((n - ell + p) as f64).sqrt() + (ell as f64).sqrt() + 7.0;
    let nu2 = 4.0 * E * (ell as f64).sqrt() / (p + 1) as f64;
    (nu1, nu2)
}

/// Lower bounds on `E σ̂_j`, `j = 1..k`: `σ_j/√(1 + ν²γ_j^{4q+4})`.
pub fn avg_sv_lower_bound(sigma: &[f64], params: &BoundParams) -> Result<Vec<f64>> {
    check_spectrum(sigma, params)?;
    params.validate_average(sigma.len())?;
    let (nu1, nu2) = nu_constants(sigma.len(), params.ell, params.p);
    let nu = nu1 * nu2;
    Ok(sv_lower(sigma, params, nu * nu))
}

/// Upper bound on `E‖A − Â‖`: `‖A₀‖ + (1 + γ_k)√k·ν·σ_{ℓ−p+1}·γ_k^{2q}`.
pub fn avg_lowrank_bound(sigma: &[f64], params: &BoundParams, kind: ErrorNorm) -> Result<f64> {
    check_spectrum(sigma, params)?;
    params.validate_average(sigma.len())?;
    let (nu1, nu2) = nu_constants(sigma.len(), params.ell, params.p);
    let s = sigma[params.tail_index()];
    let sk = sigma[params.k - 1];
    let head = optimal_error(sigma, params.k, kind);
    if s == 0.0 {
        return Ok(head);
    }
    let gamma = s / sk;
    let extra = (1.0 + gamma) * (params.k as f64).sqrt() * nu1 * nu2 * s * gamma.powi(2 * params.q as i32);
    Ok(head + extra)
}

/// Average-case bounds at the tightest admissible `p` (largest lower bound per
/// `j`, smallest error bound). Errors when no `p ≥ 2` is admissible.
pub fn tightest_avg_bounds(
    sigma: &[f64],
    k: usize,
    ell: usize,
    q: usize,
    kind: ErrorNorm,
) -> Result<(Vec<f64>, f64)> {
    let range = admissible_p(k, ell);
    if range.is_empty() {
        return Err(Error::Parameter(format!("no admissible p >= 2 for k={k}, ell={ell}")));
    }
    let mut lower = vec![0.0f64; k];
    let mut upper = f64::INFINITY;
    for p in range {
        let params = BoundParams::new(k, ell, p, q);
        for (best, b) in lower.iter_mut().zip(avg_sv_lower_bound(sigma, &params)?) {
            *best = best.max(b);
        }
        upper = upper.min(avg_lowrank_bound(sigma, &params, kind)?);
    }
    Ok((lower, upper))
}

/// Zero-padded spectrum of `a` with length `a.cols()`.
pub fn padded_spectrum(a: &Matrix) -> Vec<f64> {
    let mut s = singular_values(a);
    s.resize(a.cols(), 0.0);
    s
}

/// Exact SVD data of a fixed matrix, shared across bound trials.
pub struct BoundOracle<'a> {
    a: &'a Matrix,
    sigma: Vec<f64>,
    v: Matrix,
}

/// Quantities of one sketch realization that do not depend on `p`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialOutcome {
    pub seed: u64,
    pub sigmas: Vec<f64>,
    pub err_f: f64,
    pub err_2: f64,
    vt_omega: Matrix,
}

/// Realized errors and deterministic bounds for one trial at one `p`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub err_f: f64,
    pub err_2: f64,
    /// Absent when `Ω₁` is rank deficient.
    pub bound_f: Option<f64>,
    pub bound_2: Option<f64>,
    pub sv_lower: Option<Vec<f64>>,
    pub sigmas: Vec<f64>,
    pub full_row_rank: bool,
    pub satisfied_f: bool,
    pub satisfied_2: bool,
    pub satisfied_sv: bool,
    /// `σ̂_j ≤ σ_j` for every `j`.
    pub interlaced: bool,
}

impl<'a> BoundOracle<'a> {
    /// Computes the full SVD of `a`. Requires `a.rows() >= a.cols()` so that
    /// all `n` right singular vectors are available.
    pub fn new(a: &'a Matrix) -> Result<Self> {
        if a.rows() < a.cols() {
            return Err(Error::Shape(format!(
                "bound oracle needs rows >= cols, got {:?}",
                a.shape()
            )));
        }
        let svd = full_svd(a);
        Ok(Self {
            a,
            sigma: svd.sigma,
            v: svd.v,
        })
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }

    /// Runs the sketch with the given seed and records its realized errors.
    pub fn run(&self, k: usize, ell: usize, q: usize, single_pass: bool, seed: u64) -> Result<TrialOutcome> {
        let cfg = SketchConfig::new(ell, seed).with_power(q).with_single_pass(single_pass);
        let x = sor_svd_power(self.a, k, &cfg)?;
        let omega = gaussian_matrix(self.a.cols(), ell, seed);
        Ok(TrialOutcome {
            seed,
            err_f: approx_error(self.a, &x, ErrorNorm::Frobenius)?,
            err_2: approx_error(self.a, &x, ErrorNorm::Spectral)?,
            sigmas: x.sigma,
            vt_omega: matmul_tn(&self.v, &omega)?,
        })
    }

    /// Checks one realization against the deterministic bounds at `params`.
    pub fn evaluate(&self, trial: usize, outcome: &TrialOutcome, params: &BoundParams) -> Result<TrialRecord> {
        let split = split_projection(&outcome.vt_omega, params)?;
        let slack = BOUND_SLACK * self.sigma[0];
        let interlaced = outcome
            .sigmas
            .iter()
            .zip(&self.sigma)
            .all(|(h, s)| *h <= s + slack);
        let (bound_f, bound_2, sv_lower) = if split.full_row_rank {
            (
                Some(det_lowrank_bound(&self.sigma, params, &split, ErrorNorm::Frobenius)?),
                Some(det_lowrank_bound(&self.sigma, params, &split, ErrorNorm::Spectral)?),
                Some(det_sv_lower_bound(&self.sigma, params, &split)?),
            )
        } else {
            (None, None, None)
        };
        let satisfied_f = bound_f.is_none_or(|b| outcome.err_f <= b + slack);
        let satisfied_2 = bound_2.is_none_or(|b| outcome.err_2 <= b + slack);
        let satisfied_sv = sv_lower.as_ref().is_none_or(|lb| {
            lb.iter().zip(&outcome.sigmas).all(|(l, h)| *l <= h + slack)
        });
        Ok(TrialRecord {
            trial,
            seed: outcome.seed,
            err_f: outcome.err_f,
            err_2: outcome.err_2,
            bound_f,
            bound_2,
            sv_lower,
            sigmas: outcome.sigmas.clone(),
            full_row_rank: split.full_row_rank,
            satisfied_f,
            satisfied_2,
            satisfied_sv,
            interlaced,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundKind {
    Deterministic,
    Average,
}

/// Outcome of a Monte-Carlo bound experiment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundReport {
    pub params: BoundParams,
    pub records: Vec<TrialRecord>,
    /// Average-case lower bounds on `E σ̂_j` (absent when `p < 2`).
    pub avg_sv_lower_bounds: Option<Vec<f64>>,
    pub avg_bound_f: Option<f64>,
    pub avg_bound_2: Option<f64>,
}

fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count() as f64;
    let mean = values.clone().sum::<f64>() / n;
    if n < 2.0 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

impl BoundReport {
    pub fn trials(&self) -> usize {
        self.records.len()
    }

    /// Mean and standard error of the realized error.
    pub fn error_stats(&self, kind: ErrorNorm) -> (f64, f64) {
        mean_and_stderr(self.records.iter().map(move |r| match kind {
            ErrorNorm::Frobenius => r.err_f,
            ErrorNorm::Spectral => r.err_2,
        }))
    }

    /// Mean and standard error of `σ̂_j` (1-based `j`).
    pub fn sigma_stats(&self, j: usize) -> (f64, f64) {
        mean_and_stderr(self.records.iter().map(move |r| r.sigmas[j - 1]))
    }

    /// Fraction of full-row-rank trials meeting every deterministic bound.
    pub fn deterministic_satisfaction(&self) -> f64 {
        let applicable: Vec<_> = self.records.iter().filter(|r| r.full_row_rank).collect();
        if applicable.is_empty() {
            return 1.0;
        }
        let ok = applicable
            .iter()
            .filter(|r| r.satisfied_f && r.satisfied_2 && r.satisfied_sv)
            .count();
        ok as f64 / applicable.len() as f64
    }

    /// Median of `bound / realized error` over full-row-rank trials.
    pub fn median_bound_ratio(&self, kind: ErrorNorm) -> Option<f64> {
        let mut ratios: Vec<f64> = self
            .records
            .iter()
            .filter_map(|r| match kind {
                ErrorNorm::Frobenius => r.bound_f.map(|b| b / r.err_f),
                ErrorNorm::Spectral => r.bound_2.map(|b| b / r.err_2),
            })
            .collect();
        if ratios.is_empty() {
            return None;
        }
        ratios.sort_by(f64::total_cmp);
        let mid = ratios.len() / 2;
        Some(if ratios.len() % 2 == 1 {
            ratios[mid]
        } else {
            0.5 * (ratios[mid - 1] + ratios[mid])
        })
    }

    /// Writes one row per trial plus a `mean` summary row comparing the
    /// average realized errors to the average-case bounds.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trial,seed,err_f,err_2,bound_f,bound_2,satisfied_f,satisfied_2")?;
        let opt = |v: Option<f64>| v.map(|b| b.to_string()).unwrap_or_default();
        for r in &self.records {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.trial,
                r.seed,
                r.err_f,
                r.err_2,
                opt(r.bound_f),
                opt(r.bound_2),
                r.satisfied_f,
                r.satisfied_2
            )?;
        }
        let (mf, _) = self.error_stats(ErrorNorm::Frobenius);
        let (m2, _) = self.error_stats(ErrorNorm::Spectral);
        let sat = |m: f64, b: Option<f64>| b.map(|b| (m <= b).to_string()).unwrap_or_default();
        writeln!(
            w,
            "mean,,{mf},{m2},{},{},{},{}",
            opt(self.avg_bound_f),
            opt(self.avg_bound_2),
            sat(mf, self.avg_bound_f),
            sat(m2, self.avg_bound_2)
        )?;
        Ok(())
    }
}

/// Runs `trials` sketches (seeds `seed + t`) of `a` and checks every
/// realization against the deterministic bounds at `params`; the report also
/// carries the average-case bounds for comparison with the trial means.
pub fn bound_tightness_experiment(
    a: &Matrix,
    params: &BoundParams,
    trials: usize,
    seed: u64,
) -> Result<BoundReport> {
    let oracle = BoundOracle::new(a)?;
    run_experiment(&oracle, params, trials, seed)
}

/// As [`bound_tightness_experiment`] with a prebuilt oracle.
pub fn run_experiment(oracle: &BoundOracle<'_>, params: &BoundParams, trials: usize, seed: u64) -> Result<BoundReport> {
    if trials == 0 {
        return Err(Error::Parameter("need at least one trial".into()));
    }
    params.validate(oracle.sigma.len())?;
    let records = (0..trials)
        .into_par_iter()
        .map(|t| {
            let outcome = oracle.run(params.k, params.ell, params.q, false, seed.wrapping_add(t as u64))?;
            oracle.evaluate(t, &outcome, params)
        })
        .collect::<Result<Vec<_>>>()?;
    let avg = params.p >= 2;
    let sigma = &oracle.sigma;
    Ok(BoundReport {
        params: *params,
        records,
        avg_sv_lower_bounds: if avg { Some(avg_sv_lower_bound(sigma, params)?) } else { None },
        avg_bound_f: if avg { Some(avg_lowrank_bound(sigma, params, ErrorNorm::Frobenius)?) } else { None },
        avg_bound_2: if avg { Some(avg_lowrank_bound(sigma, params, ErrorNorm::Spectral)?) } else { None },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::{matmul, orthonormalize};

    fn geometric(n: usize, ratio: f64) -> Vec<f64> {
        (0..n).map(|j| ratio.powi(j as i32)).collect()
    }

    fn fake_split(norm_omega2: f64, norm_omega1_pinv: f64) -> OmegaSplit {
        OmegaSplit {
            omega1: Matrix::zeros(1, 1),
            omega2: Matrix::zeros(1, 1),
            norm_omega2,
            norm_omega1_pinv,
            full_row_rank: true,
        }
    }

    #[test]
    fn params_validation() {
        assert!(BoundParams::new(20, 38, 2, 0).validate(1000).is_ok());
        assert!(BoundParams::new(20, 38, 19, 0).validate(1000).is_err());
        assert!(BoundParams::new(1, 5, 0, 0).validate(10).is_err());
        assert!(BoundParams::new(2, 10, 2, 0).validate(10).is_err());
        assert!(BoundParams::new(0, 5, 2, 0).validate(10).is_err());
        let s = geometric(10, 0.5);
        assert!(avg_sv_lower_bound(&s, &BoundParams::new(3, 5, 1, 0)).is_err());
        assert_eq!(admissible_p(20, 38), 2..=18);
    }

    #[test]
    fn nu_constants_match_hand_arithmetic() {
        let (nu1, nu2) = nu_constants(1000, 38, 2);
        assert!((nu1 - 44.213).abs() < 5e-4, "{nu1}");
        assert!((nu2 - 22.3422).abs() < 5e-4, "{nu2}");
        assert!((nu1 * nu2 - 988.0).abs() < 0.5);
        assert_eq!(nu2, 4.0 * std::f64::consts::E * 38f64.sqrt() / 3.0);
        assert_eq!(nu1, 964f64.sqrt() + 38f64.sqrt() + 7.0);
    }

    #[test]
    fn vanishing_tail_gives_exact_values() {
        let mut s = geometric(30, 0.7);
        for v in s.iter_mut().skip(8) {
            *v = 0.0;
        }
        let params = BoundParams::new(5, 10, 2, 0);
        let split = fake_split(3.0, 2.0);
        assert_eq!(det_sv_lower_bound(&s, &params, &split).unwrap(), s[..5].to_vec());
        let bf = det_lowrank_bound(&s, &params, &split, ErrorNorm::Frobenius).unwrap();
        assert_eq!(bf, optimal_error(&s, 5, ErrorNorm::Frobenius));
        let b2 = det_lowrank_bound(&s, &params.clone(), &split, ErrorNorm::Spectral).unwrap();
        assert_eq!(b2, s[5]);
        for q in 0..3 {
            let params = BoundParams::new(5, 10, 2, q);
            assert_eq!(avg_sv_lower_bound(&s, &params).unwrap(), s[..5].to_vec());
            assert_eq!(avg_lowrank_bound(&s, &params, ErrorNorm::Frobenius).unwrap(), bf);
            assert_eq!(lowrank_coefficients(&s, &params, TauForm::Printed), (0.0, 0.0, 0.0, 0.0));
        }
    }

    #[test]
    fn sv_bound_formula_by_hand() {
        // σ = (4, 2, 1, 0.5, ...), k=2, ℓ=4, p=1: tail = σ₄ = 0.5.
        let s = [4.0, 2.0, 1.0, 0.5, 0.25, 0.125];
        let params = BoundParams::new(2, 4, 1, 0);
        let split = fake_split(2.0, 1.5); // Φ = 9
        let b = det_sv_lower_bound(&s, &params, &split).unwrap();
        let expect = [4.0 / (1.0 + 9.0 * (0.125f64).powi(4)).sqrt(), 2.0 / (1.0 + 9.0 * 0.25f64.powi(4)).sqrt()];
        assert!((b[0] - expect[0]).abs() < 1e-15 && (b[1] - expect[1]).abs() < 1e-15);
    }

    #[test]
    fn lowrank_bound_formula_by_hand() {
        let s = [4.0, 2.0, 1.0, 0.5, 0.25, 0.125];
        let split = fake_split(2.0, 1.5);
        let phi = 9.0;
        let tail_f = (1.0f64 + 0.25 + 0.0625 + 0.015625).sqrt();
        // q = 0, k=2, ℓ=4, p=1, s = 0.5.
        let (a, b, e, t) = (2f64.sqrt() * 0.25 / 2.0, 0.25 / 8.0, 2f64.sqrt() * 0.5, 0.5 / 4.0);
        let expect = tail_f + (a * a * phi / (1.0 + b * b * phi)).sqrt() + (e * e * phi / (1.0 + t * t * phi)).sqrt();
        let got = det_lowrank_bound(&s, &BoundParams::new(2, 4, 1, 0), &split, ErrorNorm::Frobenius).unwrap();
        assert!((got - expect).abs() < 1e-14);
        // q = 1: factor (s/σ_k)² = 1/16 on α and β, η = (σ_k/s)α, τ = β/s.
        let r = 1.0 / 16.0;
        let (a1, b1) = (a * r, b * r);
        let (e1, t1) = (2.0 / 0.5 * a1, b1 / 0.5);
        let expect1 = tail_f + (a1 * a1 * phi / (1.0 + b1 * b1 * phi)).sqrt() + (e1 * e1 * phi / (1.0 + t1 * t1 * phi)).sqrt();
        let got1 = det_lowrank_bound(&s, &BoundParams::new(2, 4, 1, 1), &split, ErrorNorm::Frobenius).unwrap();
        assert!((got1 - expect1).abs() < 1e-14);
        let got2 = det_lowrank_bound(&s, &BoundParams::new(2, 4, 1, 1), &split, ErrorNorm::Spectral).unwrap();
        assert!((got2 - (expect1 - tail_f + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn avg_bound_by_hand() {
        let s = geometric(50, 0.8);
        let params = BoundParams::new(3, 10, 2, 1);
        let (n1, n2) = nu_constants(50, 10, 2);
        let gamma = s[8] / s[2];
        let expect = optimal_error(&s, 3, ErrorNorm::Frobenius) + (1.0 + gamma) * 3f64.sqrt() * n1 * n2 * s[8] * gamma * gamma;
        let got = avg_lowrank_bound(&s, &params, ErrorNorm::Frobenius).unwrap();
        assert!((got - expect).abs() <= 1e-14 * expect);
        let lb = avg_sv_lower_bound(&s, &params).unwrap();
        let nu2 = (n1 * n2).powi(2);
        for j in 0..3 {
            let g = s[8] / s[j];
            assert!((lb[j] - s[j] / (1.0 + nu2 * g.powi(8)).sqrt()).abs() <= 1e-15);
        }
    }

    #[test]
    fn power_tightens_bounds() {
        let s = geometric(60, 0.85);
        let split = fake_split(10.0, 3.0);
        let mut prev_lr = f64::INFINITY;
        let mut prev_sv = vec![0.0; 5];
        let mut prev_avg = f64::INFINITY;
        for q in 0..4 {
            let params = BoundParams::new(5, 12, 2, q);
            let lr = det_lowrank_bound(&s, &params, &split, ErrorNorm::Frobenius).unwrap();
            assert!(lr <= prev_lr);
            prev_lr = lr;
            let sv = det_sv_lower_bound(&s, &params, &split).unwrap();
            for (j, (a, b)) in sv.iter().zip(&prev_sv).enumerate() {
                assert!(a >= b && *a <= s[j]);
            }
            prev_sv = sv;
            let avg = avg_lowrank_bound(&s, &params, ErrorNorm::Frobenius).unwrap();
            assert!(avg <= prev_avg);
            prev_avg = avg;
        }
    }

    #[test]
    fn bounds_are_scale_equivariant() {
        let s = geometric(40, 0.9);
        let c = 7.25;
        let sc: Vec<f64> = s.iter().map(|v| v * c).collect();
        let split = fake_split(5.0, 2.0);
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-13 * b.abs().max(1e-300);
        for q in 0..3 {
            let params = BoundParams::new(4, 10, 3, q);
            for kind in [ErrorNorm::Frobenius, ErrorNorm::Spectral] {
                assert!(close(
                    det_lowrank_bound_with(&sc, &params, &split, kind, TauForm::Derived).unwrap(),
                    c * det_lowrank_bound_with(&s, &params, &split, kind, TauForm::Derived).unwrap()
                ));
                assert!(close(
                    avg_lowrank_bound(&sc, &params, kind).unwrap(),
                    c * avg_lowrank_bound(&s, &params, kind).unwrap()
                ));
            }
            for (a, b) in det_sv_lower_bound(&sc, &params, &split)
                .unwrap()
                .iter()
                .zip(det_sv_lower_bound(&s, &params, &split).unwrap())
            {
                assert!(close(*a, c * b));
            }
            for (a, b) in avg_sv_lower_bound(&sc, &params).unwrap().iter().zip(avg_sv_lower_bound(&s, &params).unwrap()) {
                assert!(close(*a, c * b));
            }
        }
        // The printed τ is equivariant only without power iterations; with
        // q ≥ 1 it scales like 1/c.
        let p0 = BoundParams::new(4, 10, 3, 0);
        assert!(close(
            det_lowrank_bound(&sc, &p0, &split, ErrorNorm::Frobenius).unwrap(),
            c * det_lowrank_bound(&s, &p0, &split, ErrorNorm::Frobenius).unwrap()
        ));
        let p1 = BoundParams::new(4, 10, 3, 1);
        let t = lowrank_coefficients(&s, &p1, TauForm::Printed).3;
        let tc = lowrank_coefficients(&sc, &p1, TauForm::Printed).3;
        assert!(close(tc, t / c));
        let d = lowrank_coefficients(&s, &p1, TauForm::Derived).3;
        assert!(close(d, t * s[3]));
    }

    #[test]
    fn rank_deficient_split_is_inapplicable() {
        let s = geometric(10, 0.5);
        let params = BoundParams::new(2, 4, 1, 0);
        let mut split = fake_split(1.0, f64::INFINITY);
        split.full_row_rank = false;
        assert!(matches!(det_sv_lower_bound(&s, &params, &split), Err(Error::BoundInapplicable(_))));
        assert!(matches!(
            det_lowrank_bound(&s, &params, &split, ErrorNorm::Frobenius),
            Err(Error::BoundInapplicable(_))
        ));
    }

    #[test]
    fn identity_split() {
        let n = 12;
        let ell = 5;
        let params = BoundParams::new(2, ell, 2, 0);
        let omega = Matrix::from_fn(n, ell, |i, j| if i == j { 1.0 } else { 0.0 });
        let split = omega_split(&Matrix::identity(n), &omega, &params).unwrap();
        assert_eq!(split.omega1.shape(), (3, 5));
        assert_eq!(split.omega2.shape(), (9, 5));
        assert!(split.full_row_rank);
        assert!((split.norm_omega1_pinv - 1.0).abs() < 1e-15);
        assert!((split.norm_omega2 - 1.0).abs() < 1e-15);

        let singular = Matrix::from_fn(n, ell, |i, j| if i == j && i != 0 { 1.0 } else { 0.0 });
        let split = omega_split(&Matrix::identity(n), &singular, &params).unwrap();
        assert!(!split.full_row_rank);
        assert!(omega_split(&Matrix::identity(n), &Matrix::zeros(n, 4), &params).is_err());
    }

    #[test]
    fn gaussian_splits_are_full_rank() {
        let n = 200;
        let ell = 20;
        let params = BoundParams::new(5, ell, 2, 0);
        let v = orthonormalize(&gaussian_matrix(n, n, 1)).unwrap();
        let mut small_norm = 0;
        for seed in 0..100 {
            let split = omega_split(&v, &gaussian_matrix(n, ell, seed), &params).unwrap();
            assert!(split.full_row_rank);
            if split.norm_omega2 <= 180f64.sqrt() + 20f64.sqrt() + 7.0 {
                small_norm += 1;
            }
        }
        assert!(small_norm >= 99);
    }

    #[test]
    fn experiment_on_small_matrix() {
        let n = 60;
        let u = orthonormalize(&gaussian_matrix(n, n, 3)).unwrap();
        let v = orthonormalize(&gaussian_matrix(n, n, 4)).unwrap();
        let s = geometric(n, 0.75);
        let a = matmul(&u.scale_columns(&s), &v.transpose()).unwrap();
        let params = BoundParams::new(4, 10, 2, 1);
        let report = bound_tightness_experiment(&a, &params, 20, 100).unwrap();
        assert_eq!(report.trials(), 20);
        assert_eq!(report.deterministic_satisfaction(), 1.0);
        assert!(report.records.iter().all(|r| r.interlaced && r.full_row_rank));
        let ratio = report.median_bound_ratio(ErrorNorm::Frobenius).unwrap();
        assert!(ratio >= 1.0);
        let (mean, _) = report.error_stats(ErrorNorm::Frobenius);
        assert!(mean <= report.avg_bound_f.unwrap());

        let one = bound_tightness_experiment(&a, &params, 1, 100).unwrap();
        assert_eq!(one.records.len(), 1);
        assert_eq!(one.records[0], report.records[0]);

        let mut csv = Vec::new();
        one.write_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "trial,seed,err_f,err_2,bound_f,bound_2,satisfied_f,satisfied_2");
        assert!(lines[1].starts_with("0,100,"));
        assert!(lines[2].starts_with("mean,,"));
    }

    #[test]
    fn tightest_bounds_dominate_fixed_p() {
        let s = geometric(80, 0.9);
        let (lower, upper) = tightest_avg_bounds(&s, 5, 15, 1, ErrorNorm::Frobenius).unwrap();
        for p in admissible_p(5, 15) {
            let params = BoundParams::new(5, 15, p, 1);
            assert!(upper <= avg_lowrank_bound(&s, &params, ErrorNorm::Frobenius).unwrap());
            for (a, b) in lower.iter().zip(avg_sv_lower_bound(&s, &params).unwrap()) {
                assert!(*a >= b);
            }
        }
        assert!(tightest_avg_bounds(&s, 5, 6, 1, ErrorNorm::Frobenius).is_err());
    }
}
