//! Dense complex linear algebra: LU, SVD rank decisions, complex Schur form
//! with reordering, generalized eigenprojectors and the matrix exponential.

mod expm;
mod lu;
mod matrix;
mod schur;
mod spectral;
mod svd;

pub use expm::expm;
pub use lu::{det, inverse, solve, solve_tol, Lu};
pub use matrix::{c64, real, CMatrix, C64, ONE, ZERO};
pub use schur::{hessenberg, reorder_schur, schur, Schur};
pub use spectral::{
    block_decouple, cluster_eigenvalues, eig_clusters, split_spectrum, sylvester,
    sylvester_triangular, ClusterSet, SpectralCluster, TwoWaySplit,
};
pub use svd::{orthonormal_complement, orthonormalize, rank_basis, svd, RankBasis, Svd};

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum NumError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("QR iteration failed to converge after {iterations} iterations")]
    Convergence { iterations: usize },
    #[error("matrix is singular to working tolerance (rcond estimate {rcond:.3e})")]
    Singular { rcond: f64 },
    #[error("Sylvester equation has overlapping spectra (eigenvalue gap {gap:.3e})")]
    SpectraOverlap { gap: f64 },
}

pub(crate) fn require_square(a: &CMatrix, what: &str) -> Result<(), NumError> {
    if a.is_square() {
        Ok(())
    } else {
        Err(NumError::Shape(format!(
            "{what} needs a square matrix, got {}x{}",
            a.rows(),
            a.cols()
        )))
    }
}
