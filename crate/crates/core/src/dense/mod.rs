//! Dense linear-algebra kernels and seeded random matrices.

pub mod io;
pub mod linalg;
pub mod matrix;
pub mod rng;

pub use io::{load_matrix, read_csv, read_sord, save_matrix, write_csv, write_sord, MatrixFormat};
pub use linalg::{
    default_pinv_tol, full_svd, norm, orthonormality_defect, orthonormalize, pseudo_inverse,
    singular_values, thin_qr, truncated_svd, NormKind, QrFactors, SvdFactors,
};
pub use matrix::{matmul, matmul_nt, matmul_tn, Matrix};
pub use rng::{derive_seed, gaussian_matrix, GaussianStream};
