//! Seeded standard-normal streams.
//!
//! The stream is part of the on-disk contract: a given `(rows, cols, seed)`
//! must produce the same bits on every platform. Uniforms come from ChaCha20
//! keyed with `seed_from_u64(seed)`; each pair of 64-bit outputs `(x, y)` is
//! mapped to `u1 = ((x >> 11) + 1) · 2⁻⁵³ ∈ (0, 1]` and
//! `u2 = (y >> 11) · 2⁻⁵³ ∈ [0, 1)`, then Box–Muller emits
//! `√(−2 ln u1)·cos(2πu2)` followed by `√(−2 ln u1)·sin(2πu2)`. The
//! transcendental functions come from `libm` rather than the platform C
//! library. Matrices are filled in row-major order.

use std::f64::consts::PI;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

use super::matrix::Matrix;

const TWO_POW_M53: f64 = 1.0 / (1u64 << 53) as f64;

/// Standard-normal generator over a ChaCha20 stream.
pub struct GaussianStream {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl GaussianStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha20Rng::seed_from_u64(seed),
            spare: None,
        }
    }

    /// Uniform on `[0, 1)` with 53 random bits.
    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53
    }

    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * TWO_POW_M53;
        let u2 = (self.rng.next_u64() >> 11) as f64 * TWO_POW_M53;
        let radius = libm::sqrt(-2.0 * libm::log(u1));
        let angle = 2.0 * PI * u2;
        self.spare = Some(radius * libm::sin(angle));
        radius * libm::cos(angle)
    }

    /// Raw access for routines that need uniform integers from the same stream.
    pub fn rng_mut(&mut self) -> &mut ChaCha20Rng {
        self.spare = None;
        &mut self.rng
    }
}

/// `rows × cols` matrix of i.i.d. N(0, 1) entries, a pure function of its arguments.
pub fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut stream = GaussianStream::new(seed);
    let data = (0..rows * cols).map(|_| stream.next_gaussian()).collect();
    Matrix::from_vec_unchecked(rows, cols, data)
}

/// Derives an independent child seed for sub-draw `stream` of a generator.
///
/// SplitMix64 finalizer over `seed ⊕ φ·(stream + 1)`, so children of one
/// user seed never coincide with each other or with the parent.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ 0x9E37_79B9_7F4A_7C15u64.wrapping_mul(stream.wrapping_add(1));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
