//! Seeded synthetic test matrices.
//!
//! Every generator is a pure function of its parameters and seed. Sub-draws
//! (left factor, right factor, noise, sparse support) use independent child
//! seeds from [`derive_seed`].

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dense::{derive_seed, gaussian_matrix, matmul_nt, orthonormalize, singular_values, GaussianStream, Matrix};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Geometric spectrum from 1 down to 1e-9 over `k` values, plus noise.
    NoisyLowrank,
    /// `σ_j = 1/j`.
    Polydecay,
    /// Low-rank plus sparse `±50` corruption.
    RpcaInstance,
    RandomOrthonormal,
}

/// Parameters of one generated matrix, as recorded in sidecar files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenSpec {
    pub family: Family,
    pub n: usize,
    /// Rank `k` (noisy low-rank) or `r` (RPCA). Ignored by the other families.
    pub k_or_r: usize,
    /// Number of sparse corruptions, RPCA only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<usize>,
    pub seed: u64,
}

impl GenSpec {
    pub fn validate(&self) -> Result<()> {
        let needs_rank = matches!(self.family, Family::NoisyLowrank | Family::RpcaInstance);
        if needs_rank && self.k_or_r >= self.n {
            return Err(Error::Parameter(format!(
                "rank {} must be below n={}",
                self.k_or_r, self.n
            )));
        }
        if let Some(s) = self.s {
            if self.n.checked_mul(self.n).is_none_or(|n2| s > n2) {
                return Err(Error::Parameter(format!("s={s} exceeds n²")));
            }
        }
        if self.family == Family::RpcaInstance && self.s.is_none() {
            return Err(Error::Parameter("rpca_instance needs a sparse count s".into()));
        }
        Ok(())
    }

    /// Generates the described matrix (`X` for RPCA instances).
    pub fn generate(&self) -> Result<Matrix> {
        self.validate()?;
        match self.family {
            Family::NoisyLowrank => gen_noisy_lowrank(self.n, self.k_or_r, self.seed),
            Family::Polydecay => gen_polydecay(self.n, self.seed),
            Family::RpcaInstance => {
                gen_rpca_instance(self.n, self.k_or_r, self.s.unwrap_or(0), self.seed).map(|i| i.x)
            }
            Family::RandomOrthonormal => {
                if self.n == 0 {
                    return Err(Error::Parameter("n must be positive".into()));
                }
                Ok(random_orthonormal(self.n, self.seed))
            }
        }
    }
}

/// How the noise matrix `E = G / c` is normalized.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseNormalization {
    /// `c = ‖G‖₂`.
    #[default]
    Spectral,
    /// `c = ‖G‖_F`.
    Frobenius,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseOptions {
    /// Multiplies `σ_k · E`. Zero gives the exact rank-`k` matrix.
    pub coefficient: f64,
    pub normalization: NoiseNormalization,
}

impl Default for NoiseOptions {
    fn default() -> Self {
        Self {
            coefficient: 0.1,
            normalization: NoiseNormalization::Spectral,
        }
    }
}

/// `σ_j = 10^(−9(j−1)/(k−1))` for `j ≤ k`, zero afterwards; length `n`.
pub fn geometric_spectrum(n: usize, k: usize) -> Result<Vec<f64>> {
    if k < 2 {
        return Err(Error::Parameter(format!("geometric decay needs k >= 2, got {k}")));
    }
    if k >= n {
        return Err(Error::Parameter(format!("k={k} must be below n={n}")));
    }
    let mut s = vec![0.0; n];
    for (j, v) in s.iter_mut().enumerate().take(k) {
        *v = 10f64.powf(-9.0 * j as f64 / (k - 1) as f64);
    }
    Ok(s)
}

/// Noisy low-rank test matrix `UΣVᵀ + 0.1σ_k·G/‖G‖₂`.
pub fn gen_noisy_lowrank(n: usize, k: usize, seed: u64) -> Result<Matrix> {
    gen_noisy_lowrank_with(n, k, seed, &NoiseOptions::default())
}

pub fn gen_noisy_lowrank_with(n: usize, k: usize, seed: u64, opts: &NoiseOptions) -> Result<Matrix> {
    let sigma = geometric_spectrum(n, k)?;
    let u = random_orthonormal(n, derive_seed(seed, 0)).columns(0..k);
    let v = random_orthonormal(n, derive_seed(seed, 1)).columns(0..k);
    let signal = matmul_nt(&u.scale_columns(&sigma[..k]), &v)?;
    if opts.coefficient == 0.0 {
        return Ok(signal);
    }
    let g = gaussian_matrix(n, n, derive_seed(seed, 2));
    let c = match opts.normalization {
        NoiseNormalization::Spectral => singular_values(&g)[0],
        NoiseNormalization::Frobenius => g.frobenius_norm(),
    };
    signal.add_scaled(opts.coefficient * sigma[k - 1] / c, &g)
}

/// `UΣVᵀ` with random orthonormal `U`, `V` and `σ_j = 1/j`.
pub fn gen_polydecay(n: usize, seed: u64) -> Result<Matrix> {
    if n < 2 {
        return Err(Error::Parameter(format!("polydecay needs n >= 2, got {n}")));
    }
    let sigma: Vec<f64> = (1..=n).map(|j| 1.0 / j as f64).collect();
    let u = random_orthonormal(n, derive_seed(seed, 0));
    let v = random_orthonormal(n, derive_seed(seed, 1));
    matmul_nt(&u.scale_columns(&sigma), &v)
}

/// A ground-truth robust PCA problem `x = l_true + s_true`.
#[derive(Clone, Debug, PartialEq)]
pub struct RpcaInstance {
    pub x: Matrix,
    pub l_true: Matrix,
    pub s_true: Matrix,
}

/// `L = UVᵀ` with `n × r` standard Gaussian factors; `S` has exactly `s`
/// entries equal to `±50` at uniformly drawn distinct positions.
pub fn gen_rpca_instance(n: usize, r: usize, s: usize, seed: u64) -> Result<RpcaInstance> {
    if r == 0 || r >= n {
        return Err(Error::Parameter(format!("need 1 <= r < n, got r={r}, n={n}")));
    }
    let cells = n
        .checked_mul(n)
        .ok_or_else(|| Error::Parameter(format!("n={n} too large")))?;
    if s > cells {
        return Err(Error::Parameter(format!("s={s} exceeds n²={cells}")));
    }
    let u = gaussian_matrix(n, r, derive_seed(seed, 0));
    let v = gaussian_matrix(n, r, derive_seed(seed, 1));
    let l_true = matmul_nt(&u, &v)?;

    let mut stream = GaussianStream::new(derive_seed(seed, 2));
    let rng = stream.rng_mut();
    let mut positions = index::sample(rng, cells, s).into_vec();
    positions.sort_unstable();
    let mut sparse = vec![0.0; cells];
    for pos in positions {
        sparse[pos] = if rng.random_bool(0.5) { 50.0 } else { -50.0 };
    }
    let s_true = Matrix::new(n, n, sparse)?;
    let x = l_true.add(&s_true)?;
    Ok(RpcaInstance { x, l_true, s_true })
}

/// Haar-like random orthogonal matrix: the `Q` of a seeded Gaussian.
pub fn random_orthonormal(n: usize, seed: u64) -> Matrix {
    orthonormalize(&gaussian_matrix(n, n, seed)).expect("square input")
}
