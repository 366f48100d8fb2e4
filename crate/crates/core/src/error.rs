use num_complex::Complex64;
use thiserror::Error;

use crate::numkit::NumError;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("invalid direct-sum split: {0}")]
    Split(String),
    #[error("spectral cut {lambda} collides with eigenvalue {re}{im:+}i (|mu| = {abs}) in parity {parity}", re = eigenvalue.re, im = eigenvalue.im, abs = eigenvalue.norm())]
    CutCollision {
        lambda: f64,
        eigenvalue: Complex64,
        parity: usize,
    },
    #[error("degenerate splitting: {0}")]
    Degeneracy(String),
    #[error("complex is not acyclic: Laplacian eigenvalue {re}{im:+}i is numerically zero", re = eigenvalue.re, im = eigenvalue.im)]
    NotAcyclic { eigenvalue: Complex64 },
    #[error("torsion values live in different trivializations ({left} vs {right})")]
    BasisMismatch { left: String, right: String },
    #[error("invalid (co)homology basis: {0}")]
    Basis(String),
    #[error("invalid metric: {0}")]
    Metric(String),
    #[error("flux degree error: {0}")]
    FluxDegree(String),
    #[error("flux is not closed: anticommutator residual {residual:.3e} exceeds {bound:.3e}")]
    Closedness { residual: f64, bound: f64 },
    #[error("operator is not an involution: residual {residual:.3e}")]
    Involution { residual: f64 },
    #[error("parity error: {0}")]
    Parity(String),
    #[error("infeasible generator request: {0}")]
    Infeasible(String),
    #[error("projector does not commute with the operator: residual {residual:.3e}")]
    Restriction { residual: f64 },
    #[error("branch jump of {jump:.3} rad across a half-stencil; refine the step")]
    StencilTooCoarse { jump: f64 },
    #[error("complex fails validation: {0}")]
    Invalid(String),
    #[error("Agmon ray at angle {theta} meets eigenvalue {re}{im:+}i", re = eigenvalue.re, im = eigenvalue.im)]
    AgmonCollision { theta: f64, eigenvalue: Complex64 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
