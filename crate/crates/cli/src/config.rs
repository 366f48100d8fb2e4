use std::fs;
use std::path::Path;

use cmtorsion::{Cut, Tolerances};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Table,
    Json,
}

/// Run settings read from an optional TOML file. Command-line flags are
/// applied on top.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub tolerances: Tolerances,
    pub seed: u64,
    /// Spectral cuts; `inf` keeps the whole complex.
    pub lambda: Vec<f64>,
    /// Finite-difference half-steps.
    pub fd_eps: Vec<f64>,
    /// Agmon angle for the high-part determinant; plain determinants when unset.
    pub theta: Option<f64>,
    pub format: OutputFormat,
    /// Worker threads for sweeps; 0 lets the pool decide.
    pub threads: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            tolerances: Tolerances::default(),
            seed: 0,
            lambda: vec![f64::INFINITY],
            fd_eps: vec![1e-3],
            theta: None,
            format: OutputFormat::Table,
            threads: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| CliError::parse(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn check(&self) -> Result<(), CliError> {
        self.tolerances.check().map_err(CliError::parse)?;
        if let Some(t) = self.theta {
            if !(t > 0.0 && t < std::f64::consts::TAU) {
                return Err(CliError::parse(format!(
                    "theta must lie in (0, 2pi), got {t}"
                )));
            }
        }
        if let Some(l) = self.lambda.iter().find(|l| l.is_nan() || **l < 0.0) {
            return Err(CliError::parse(format!(
                "lambda must be nonnegative, got {l}"
            )));
        }
        if let Some(e) = self.fd_eps.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
            return Err(CliError::parse(format!("fd_eps must be positive, got {e}")));
        }
        Ok(())
    }

    pub fn cuts(&self) -> Vec<Cut> {
        self.lambda.iter().map(|&l| to_cut(l)).collect()
    }

    pub fn pool(&self) -> Result<rayon::ThreadPool, CliError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| CliError::failure(format!("thread pool: {e}")))
    }
}

pub fn to_cut(lambda: f64) -> Cut {
    if lambda.is_infinite() {
        Cut::Above
    } else {
        Cut::At(lambda)
    }
}
