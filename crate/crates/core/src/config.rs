use serde::{Deserialize, Serialize};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-7;
pub const DEFAULT_VALIDATION_TOL: f64 = 1e-10;

/// Numerical tolerances shared by every stage of the pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative singular value cutoff for rank decisions.
    pub rank_tol: f64,
    /// Relative eigenvalue separation below which eigenvalues are merged and
    /// a spectral cut is considered to collide with the spectrum.
    pub cluster_tol: f64,
    /// Relative residual bound for the square-zero identities.
    pub validation_tol: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_tol: DEFAULT_RANK_TOL,
            cluster_tol: DEFAULT_CLUSTER_TOL,
            validation_tol: DEFAULT_VALIDATION_TOL,
        }
    }
}

impl Tolerances {
    pub fn check(&self) -> Result<(), String> {
        for (name, v) in [
            ("rank_tol", self.rank_tol),
            ("cluster_tol", self.cluster_tol),
            ("validation_tol", self.validation_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(())
    }
}
