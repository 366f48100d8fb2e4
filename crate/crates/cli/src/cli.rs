use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use cmtorsion::selftest::Suite;

use crate::commands::{self, BetaKind, FamilyKind, Model, ModelParams, Profile, SweepParams};
use crate::config::{OutputFormat, RunConfig};
use crate::error::{CliError, ExitCode};

#[derive(Debug, Parser)]
#[command(
    name = "cmtorsion",
    version,
    about = "Torsion of finite-dimensional bi-graded complexes"
)]
pub struct Cli {
    /// TOML run configuration; flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<OutputFormat>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub rank_tol: Option<f64>,
    #[arg(long, global = true)]
    pub cluster_tol: Option<f64>,
    #[arg(long, global = true)]
    pub validation_tol: Option<f64>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct ModelArgs {
    /// Torus dimension.
    #[arg(long)]
    pub m: Option<usize>,
    /// Flux form, e.g. `123:2.0,145:0.5`.
    #[arg(long)]
    pub flux: Option<String>,
    /// `I`, `diag:a,b,c` or rows `a,b;c,d`.
    #[arg(long)]
    pub metric: Option<String>,
    #[arg(long, default_value_t = 1, allow_negative_numbers = true)]
    pub orientation: i8,
    /// Random generator dimensions `n0,n1`.
    #[arg(long)]
    pub dims: Option<String>,
    /// Target cohomology dimensions `b0,b1`.
    #[arg(long)]
    pub betti: Option<String>,
    #[arg(long, value_enum, default_value_t)]
    pub profile: Profile,
}

impl ModelArgs {
    fn params(&self) -> ModelParams {
        ModelParams {
            m: self.m,
            flux: self.flux.clone(),
            metric: self.metric.clone(),
            orientation: self.orientation,
            dims: self.dims.clone(),
            betti: self.betti.clone(),
            profile: self.profile,
            p: None,
            from: None,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the square-zero identities of a document.
    Validate { path: PathBuf },
    /// Torsion of a document at one or more spectral cuts.
    Torsion {
        path: PathBuf,
        /// Spectral cuts; `inf` keeps the whole complex.
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        /// Named basis from the document registry.
        #[arg(long)]
        basis: Option<String>,
        /// Agmon angle in (0, 2pi).
        #[arg(long)]
        theta: Option<f64>,
    },
    /// Write a model complex as a document.
    Generate {
        #[arg(value_enum)]
        model: Model,
        #[command(flatten)]
        model_args: ModelArgs,
        /// Form degree label for `dolbeault-wrap`.
        #[arg(long)]
        p: Option<usize>,
        /// Blocks to wrap for `dolbeault-wrap`.
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of the variation of the torsion.
    Sweep {
        /// A document path, `torus` or `random`.
        source: String,
        #[arg(long, value_enum)]
        family: FamilyKind,
        /// Parameter grid `a:b:n`.
        #[arg(long, default_value = "0:0.5:6")]
        param: String,
        #[arg(long, value_delimiter = ',')]
        fd_eps: Vec<f64>,
        #[arg(long, value_delimiter = ',')]
        lambda: Vec<f64>,
        #[arg(long, value_enum, default_value_t)]
        beta_kind: BetaKind,
        /// Entry scale of the random generator.
        #[arg(long, default_value_t = 0.5)]
        scale: f64,
        /// Metric direction for torus sweeps; defaults to `e1 e1^T`.
        #[arg(long)]
        direction: Option<String>,
        #[command(flatten)]
        model_args: ModelArgs,
        #[arg(long)]
        seed: Option<u64>,
        /// Also write the machine-readable report here.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Run the seeded self-check suites.
    Selftest {
        #[arg(long, value_delimiter = ',')]
        suite: Vec<Suite>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 16)]
        seeds: u64,
        /// Replace every check threshold.
        #[arg(long)]
        tol: Option<f64>,
    },
}

impl Cli {
    fn config(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(f) = self.format {
            cfg.format = f;
        }
        if let Some(t) = self.threads {
            cfg.threads = t;
        }
        if let Some(t) = self.rank_tol {
            cfg.tolerances.rank_tol = t;
        }
        if let Some(t) = self.cluster_tol {
            cfg.tolerances.cluster_tol = t;
        }
        if let Some(t) = self.validation_tol {
            cfg.tolerances.validation_tol = t;
        }
        match &self.command {
            Command::Torsion { lambda, theta, .. } => {
                if !lambda.is_empty() {
                    cfg.lambda = lambda.clone();
                }
                cfg.theta = theta.or(cfg.theta);
            }
            Command::Sweep {
                fd_eps,
                lambda,
                seed,
                ..
            } => {
                if !fd_eps.is_empty() {
                    cfg.fd_eps = fd_eps.clone();
                }
                if !lambda.is_empty() {
                    cfg.lambda = lambda.clone();
                }
                cfg.seed = seed.unwrap_or(cfg.seed);
            }
            Command::Generate { seed, .. } => cfg.seed = seed.unwrap_or(cfg.seed),
            Command::Validate { .. } | Command::Selftest { .. } => {}
        }
        cfg.check()?;
        Ok(cfg)
    }

    pub fn execute(&self, out: &mut dyn Write) -> Result<ExitCode, CliError> {
        let cfg = self.config()?;
        match &self.command {
            Command::Validate { path } => commands::validate_cmd(path, &cfg, out),
            Command::Torsion { path, basis, .. } => {
                commands::torsion_cmd(path, basis.as_deref(), &cfg, out)
            }
            Command::Generate {
                model,
                model_args,
                p,
                from,
                out: out_path,
                ..
            } => {
                let params = ModelParams {
                    p: *p,
                    from: from.clone(),
                    ..model_args.params()
                };
                commands::generate_cmd(*model, &params, out_path.as_deref(), &cfg, out)
            }
            Command::Sweep {
                source,
                family,
                param,
                beta_kind,
                scale,
                direction,
                model_args,
                report,
                ..
            } => {
                let params = SweepParams {
                    source: source.clone(),
                    family: *family,
                    grid: commands::parse_grid(param)?,
                    beta_kind: *beta_kind,
                    scale: *scale,
                    direction: direction.clone(),
                    model: model_args.params(),
                };
                commands::sweep_cmd(&params, report.as_deref(), &cfg, out)
            }
            Command::Selftest {
                suite,
                seed,
                seeds,
                tol,
            } => commands::selftest_cmd(suite, *seed, *seeds, *tol, &cfg, out),
        }
    }
}

/// Parses `args` (program name first) and runs the command. Reports go to
/// `out`, diagnostics to `err`; the return value is the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() {
                ExitCode::Parse.code()
            } else {
                ExitCode::Ok.code()
            };
        }
    };
    match cli.execute(out) {
        Ok(code) => code.code(),
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.code.code()
        }
    }
}
