//! Subspace-orbit randomized SVD (SOR-SVD) and friends.
//!
//! * [`dense`]: row-major matrices, QR/SVD, norms, seeded Gaussian draws, file formats.
//! * [`sketch`]: SOR-SVD (basic, power, single-pass), R-SVD and TSR-SVD.
//! * [`bounds`]: deterministic and average-case error bounds and a Monte-Carlo harness.
//! * [`rpca`]: robust PCA by inexact ALM with SOR-SVD as the low-rank step.
//! * [`matrixgen`]: synthetic test families.

pub mod bounds;
pub mod dense;
pub mod error;
pub mod matrixgen;
pub mod rpca;
pub mod sketch;

pub use dense::Matrix;
pub use error::{Error, Result};
