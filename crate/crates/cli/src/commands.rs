use std::io::Write;
use std::path::{Path, PathBuf};

use cmtorsion::bicomplex::{laplacian, validate};
use cmtorsion::deform::{
    variation_report, ConjugationFamily, ConjugationKind, Family, TorusMetricPath, VariationReport,
};
use cmtorsion::models::{
    dolbeault_wrap, random_bicomplex, random_even, torus_model, Form, SpectralProfile,
};
use cmtorsion::numkit::{c64, schur, CMatrix, C64};
use cmtorsion::selftest::{self, SelftestOptions, Suite};
use cmtorsion::torsion::{torsion_truncated, TorsionValue};
use cmtorsion::{BiComplex, Cut, Error, EvenOp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::document::{ComplexDocument, Labels};
use crate::error::{CliError, ExitCode};
use crate::jsonfmt;

pub type Outcome = Result<ExitCode, CliError>;

fn cx(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

fn fmt_c(z: C64) -> String {
    format!("{:+.9e}{:+.9e}i", z.re, z.im)
}

fn fmt_cut(cut: Cut) -> String {
    match cut {
        Cut::At(l) => format!("{l}"),
        Cut::Above => "inf".to_string(),
    }
}

fn emit<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<(), CliError> {
    jsonfmt::write(out, value)?;
    Ok(())
}

// ---------------------------------------------------------------- parsing

/// `I`, `I3`, `diag:a,b,c` or rows `a,b;c,d`.
pub fn parse_metric(spec: &str, m: usize) -> Result<CMatrix, CliError> {
    let spec = spec.trim();
    let bad = |what: &str| CliError::parse(format!("metric `{spec}`: {what}"));
    if spec == "I" || spec == format!("I{m}") {
        return Ok(CMatrix::identity(m));
    }
    let number = |s: &str| s.trim().parse::<f64>().map_err(|_| bad("bad number"));
    if let Some(rest) = spec.strip_prefix("diag:") {
        let d = rest.split(',').map(number).collect::<Result<Vec<_>, _>>()?;
        if d.len() != m {
            return Err(bad(&format!("expected {m} diagonal entries")));
        }
        return Ok(CMatrix::diag_real(&d));
    }
    let rows = spec
        .split(';')
        .map(|r| r.split(',').map(number).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(bad(&format!("expected a {m} x {m} matrix")));
    }
    Ok(CMatrix::from_fn(m, m, |i, j| c64(rows[i][j], 0.0)))
}

pub fn parse_pair(spec: &str, what: &str) -> Result<(usize, usize), CliError> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    match parts.as_slice() {
        [a, b] => match (a.parse(), b.parse()) {
            (Ok(a), Ok(b)) => Ok((a, b)),
            _ => Err(CliError::parse(format!(
                "{what} `{spec}`: expected two integers"
            ))),
        },
        _ => Err(CliError::parse(format!(
            "{what} `{spec}`: expected `n0,n1`"
        ))),
    }
}

/// `a:b:n`, `n` evenly spaced points from `a` to `b` inclusive.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::parse(format!("grid `{spec}`: expected `a:b:n`"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [a, b, n] = parts.as_slice() else {
        return Err(bad());
    };
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    let n: usize = n.trim().parse().map_err(|_| bad())?;
    if !(a.is_finite() && b.is_finite()) {
        return Err(bad());
    }
    Ok(match n {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..n)
            .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
            .collect(),
    })
}

pub fn parse_flux(spec: &str) -> Result<Form, CliError> {
    spec.parse::<Form>()
        .map_err(|e| CliError::parse(format!("flux `{spec}`: {e}")))
}

// --------------------------------------------------------------- validate

#[derive(Serialize)]
struct ValidateJson<'a> {
    command: &'static str,
    dims: [usize; 2],
    pass: bool,
    residuals: &'a [cmtorsion::bicomplex::Residual],
}

pub fn validate_cmd(path: &Path, cfg: &RunConfig, out: &mut dyn Write) -> Outcome {
    let doc = ComplexDocument::read(path)?;
    let c = doc.complex()?;
    let report = validate(&c, cfg.tolerances.validation_tol);
    match cfg.format {
        OutputFormat::Json => emit(
            out,
            &ValidateJson {
                command: "validate",
                dims: doc.dims,
                pass: report.pass,
                residuals: &report.residuals,
            },
        )?,
        OutputFormat::Table => {
            writeln!(out, "dims ({}, {})", c.n0, c.n1)?;
            writeln!(
                out,
                "{:<12} {:>12} {:>12}  status",
                "identity", "residual", "bound"
            )?;
            for r in &report.residuals {
                let status = if r.pass { "ok" } else { "FAIL" };
                writeln!(
                    out,
                    "{:<12} {:>12.3e} {:>12.3e}  {status}",
                    r.identity, r.residual, r.bound
                )?;
            }
        }
    }
    Ok(if report.pass {
        ExitCode::Ok
    } else {
        ExitCode::Failure
    })
}

// ---------------------------------------------------------------- torsion

#[derive(Serialize)]
struct TorsionEntry {
    lambda: Option<f64>,
    coord: [f64; 2],
    modulus: f64,
    phase: f64,
    cohomology_basis: String,
    homology_basis: String,
    low_coord: [f64; 2],
    low_dims: [usize; 2],
    tail_factor: [f64; 2],
    ratio_to_first: [f64; 2],
}

#[derive(Serialize)]
struct TorsionJson {
    command: &'static str,
    dims: [usize; 2],
    theta: Option<f64>,
    values: Vec<TorsionEntry>,
}

/// Laplacian eigenvalue moduli closest to `lambda`, for collision messages.
fn nearest_moduli(c: &BiComplex, lambda: f64) -> Vec<f64> {
    let lap = laplacian(c);
    let mut moduli: Vec<f64> = [&lap.even, &lap.odd]
        .iter()
        .filter_map(|m| schur(m).ok())
        .flat_map(|s| s.eigenvalues().into_iter().map(|z| z.norm()))
        .collect();
    moduli.sort_by(|a, b| (a - lambda).abs().total_cmp(&(b - lambda).abs()));
    moduli.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
    moduli.truncate(3);
    moduli
}

pub fn torsion_cmd(
    path: &Path,
    basis: Option<&str>,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Outcome {
    let doc = ComplexDocument::read(path)?;
    let c = doc.complex()?;
    cmtorsion::bicomplex::require_valid(&c, cfg.tolerances.validation_tol)?;
    let bases = basis.map(|name| doc.basis(name)).transpose()?;
    let mut values: Vec<(Cut, TorsionValue)> = Vec::new();
    for cut in cfg.cuts() {
        match torsion_truncated(&c, cut, bases.as_ref(), cfg.theta, &cfg.tolerances) {
            Ok(v) => values.push((cut, v)),
            Err(e @ Error::CutCollision { .. }) => {
                let near = nearest_moduli(&c, cut.value().unwrap_or(f64::INFINITY));
                return Err(CliError::from(e.clone()).with_detail(format!(
                    "nearest eigenvalue moduli: {}",
                    near.iter()
                        .map(|m| format!("{m:.6e}"))
                        .collect::<Vec<_>>()
                        .join(", ")
                )));
            }
            Err(e) => return Err(e.into()),
        }
    }
    let first = values.first().map(|(_, v)| v.clone());
    let mut entries = Vec::new();
    for (cut, v) in &values {
        let ratio = match &first {
            Some(f) => v.compare(f)?,
            None => C64::new(1.0, 0.0),
        };
        entries.push(TorsionEntry {
            lambda: cut.value(),
            coord: cx(v.coord),
            modulus: v.coord.norm(),
            phase: v.phase(),
            cohomology_basis: v.coh_basis_id.clone(),
            homology_basis: v.hom_basis_id.clone(),
            low_coord: cx(v.low_coord),
            low_dims: [v.low_dims.0, v.low_dims.1],
            tail_factor: cx(v.tail_factor),
            ratio_to_first: cx(ratio),
        });
    }
    match cfg.format {
        OutputFormat::Json => emit(
            out,
            &TorsionJson {
                command: "torsion",
                dims: doc.dims,
                theta: cfg.theta,
                values: entries,
            },
        )?,
        OutputFormat::Table => {
            for ((cut, v), e) in values.iter().zip(&entries) {
                writeln!(out, "lambda       {}", fmt_cut(*cut))?;
                writeln!(out, "  tau        {}", fmt_c(v.coord))?;
                writeln!(
                    out,
                    "  bases      cohomology `{}`, homology `{}`",
                    v.coh_basis_id, v.hom_basis_id
                )?;
                writeln!(
                    out,
                    "  low part   {}  dims ({}, {})",
                    fmt_c(v.low_coord),
                    v.low_dims.0,
                    v.low_dims.1
                )?;
                writeln!(out, "  high det   {}", fmt_c(v.tail_factor))?;
                if values.len() > 1 {
                    let r = e.ratio_to_first;
                    writeln!(out, "  / first    {}", fmt_c(c64(r[0], r[1])))?;
                }
            }
        }
    }
    Ok(ExitCode::Ok)
}

// --------------------------------------------------------------- generate

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Model {
    Torus,
    Random,
    DolbeaultWrap,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Profile {
    #[default]
    Banded,
    Independent,
}

impl Profile {
    fn spectral(self) -> SpectralProfile {
        match self {
            Profile::Banded => SpectralProfile::default(),
            Profile::Independent => SpectralProfile::Independent,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ModelParams {
    pub m: Option<usize>,
    pub flux: Option<String>,
    pub metric: Option<String>,
    pub orientation: i8,
    pub dims: Option<String>,
    pub betti: Option<String>,
    pub profile: Profile,
    pub p: Option<usize>,
    pub from: Option<PathBuf>,
}

fn torus_from(params: &ModelParams) -> Result<(usize, CMatrix, Form), CliError> {
    let m = params.m.unwrap_or(3);
    let flux = parse_flux(params.flux.as_deref().unwrap_or("123:1.0"))?;
    let g = parse_metric(params.metric.as_deref().unwrap_or("I"), m)?;
    Ok((m, g, flux))
}

fn random_from(params: &ModelParams, seed: u64) -> Result<(BiComplex, String), CliError> {
    let dims = parse_pair(params.dims.as_deref().unwrap_or("2,2"), "dims")?;
    let betti = parse_pair(params.betti.as_deref().unwrap_or("0,0"), "betti")?;
    let c = random_bicomplex(dims, betti, &params.profile.spectral(), seed)
        .map_err(CliError::generator)?;
    let provenance = format!(
        "random dims={},{} betti={},{} profile={:?} seed={seed}",
        dims.0, dims.1, betti.0, betti.1, params.profile
    )
    .to_lowercase();
    Ok((c, provenance))
}

pub fn build_document(
    model: Model,
    params: &ModelParams,
    seed: u64,
    tol: f64,
) -> Result<ComplexDocument, CliError> {
    match model {
        Model::Torus => {
            let (m, g, flux) = torus_from(params)?;
            let t = torus_model(m, &g, &flux, params.orientation).map_err(CliError::generator)?;
            let labels = Labels {
                provenance: Some(format!(
                    "torus m={m} metric={} orientation={:+}",
                    params.metric.as_deref().unwrap_or("I"),
                    params.orientation
                )),
                flux: Some(flux.to_string()),
                ..Labels::default()
            };
            Ok(ComplexDocument::from_complex(&t.complex, labels))
        }
        Model::Random => {
            let (c, provenance) = random_from(params, seed)?;
            Ok(ComplexDocument::from_complex(
                &c,
                Labels {
                    provenance: Some(provenance),
                    ..Labels::default()
                },
            ))
        }
        Model::DolbeaultWrap => {
            let p = params.p.unwrap_or(0);
            let (c, mut labels) = match &params.from {
                Some(path) => {
                    let doc = ComplexDocument::read(path)?;
                    (doc.complex()?, doc.labels)
                }
                None => {
                    let (c, provenance) = random_from(params, seed)?;
                    (
                        c,
                        Labels {
                            provenance: Some(provenance),
                            ..Labels::default()
                        },
                    )
                }
            };
            let wrapped =
                dolbeault_wrap(p, c.d.clone(), c.ds.clone(), tol).map_err(CliError::generator)?;
            labels.p = Some(wrapped.p);
            let provenance = labels.provenance.take().unwrap_or_else(|| "blocks".into());
            labels.provenance = Some(format!("dolbeault-wrap p={p} of {provenance}"));
            Ok(ComplexDocument::from_complex(&wrapped.complex, labels))
        }
    }
}

pub fn generate_cmd(
    model: Model,
    params: &ModelParams,
    out_path: Option<&Path>,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Outcome {
    let doc = build_document(model, params, cfg.seed, cfg.tolerances.validation_tol)?;
    match out_path {
        Some(path) => {
            let file = std::fs::File::create(path)?;
            doc.write_to(std::io::BufWriter::new(file))?;
            if cfg.format == OutputFormat::Table {
                writeln!(
                    out,
                    "wrote {} (dims {}, {})",
                    path.display(),
                    doc.dims[0],
                    doc.dims[1]
                )?;
            }
        }
        None => doc.write_to(&mut *out)?,
    }
    Ok(ExitCode::Ok)
}

// ------------------------------------------------------------------ sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FamilyKind {
    Metric,
    Flux,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum BetaKind {
    /// Strictly upper triangular blocks.
    Nilpotent,
    #[default]
    Generic,
}

#[derive(Debug, Clone)]
pub struct SweepParams {
    pub source: String,
    pub family: FamilyKind,
    pub grid: Vec<f64>,
    pub beta_kind: BetaKind,
    /// Entry scale of the random generator.
    pub scale: f64,
    /// Metric direction `g(u) = g0 + u * direction` for torus sweeps.
    pub direction: Option<String>,
    pub model: ModelParams,
}

fn strictly_upper(n: usize, rng: &mut ChaCha8Rng, scale: f64) -> CMatrix {
    CMatrix::from_fn(n, n, |i, j| {
        if j > i {
            c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)) * scale
        } else {
            c64(0.0, 0.0)
        }
    })
}

fn generator(kind: BetaKind, n0: usize, n1: usize, scale: f64, seed: u64) -> EvenOp {
    match kind {
        BetaKind::Generic => random_even(n0, n1, scale, seed),
        BetaKind::Nilpotent => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            EvenOp {
                even: strictly_upper(n0, &mut rng, scale),
                odd: strictly_upper(n1, &mut rng, scale),
            }
        }
    }
}

#[derive(Serialize)]
struct RowJson {
    t: f64,
    predicted: Option<[f64; 2]>,
    exact: Option<[f64; 2]>,
    fd: Option<[f64; 2]>,
    fd_full: Option<[f64; 2]>,
    local_term: Option<[f64; 2]>,
    abs_err: Option<f64>,
    rel_err: Option<f64>,
    pass: bool,
    error: Option<String>,
}

#[derive(Serialize)]
struct ReportJson {
    lambda: Option<f64>,
    eps: f64,
    full_invariant: bool,
    pass: bool,
    rows: Vec<RowJson>,
}

#[derive(Serialize)]
struct SweepJson<'a> {
    command: &'static str,
    source: &'a str,
    family: String,
    transport: String,
    generator: Option<String>,
    seed: u64,
    pass: bool,
    reports: Vec<ReportJson>,
}

fn report_json(r: &VariationReport) -> ReportJson {
    ReportJson {
        lambda: r.cut.value(),
        eps: r.eps,
        full_invariant: r.full_invariant,
        pass: r.pass(),
        rows: r
            .rows
            .iter()
            .map(|row| RowJson {
                t: row.t,
                predicted: row.predicted.map(cx),
                exact: row.exact.map(cx),
                fd: row.fd.map(cx),
                fd_full: row.fd_full.map(cx),
                local_term: row.local_term.map(cx),
                abs_err: row.abs_err,
                rel_err: row.rel_err,
                pass: row.pass,
                error: row.error.clone(),
            })
            .collect(),
    }
}

fn opt_c(z: Option<C64>) -> String {
    z.map_or_else(|| "-".into(), fmt_c)
}

fn write_table(out: &mut dyn Write, r: &VariationReport) -> std::io::Result<()> {
    writeln!(
        out,
        "family {}  transport {}  lambda {}  eps {:e}",
        r.family,
        r.transport,
        fmt_cut(r.cut),
        r.eps
    )?;
    writeln!(
        out,
        "{:>8}  {:>33}  {:>33}  {:>10}  {:>33}  status",
        "t", "predicted", "fd", "abs err", "fd full"
    )?;
    for row in &r.rows {
        let status = match (&row.error, row.pass) {
            (Some(e), _) => format!("ERROR {e}"),
            (None, true) => "ok".into(),
            (None, false) => "MISMATCH".into(),
        };
        writeln!(
            out,
            "{:>8.4}  {:>33}  {:>33}  {:>10}  {:>33}  {status}",
            row.t,
            opt_c(row.predicted),
            opt_c(row.fd),
            row.abs_err
                .map_or_else(|| "-".into(), |e| format!("{e:.3e}")),
            opt_c(row.fd_full),
        )?;
    }
    Ok(())
}

fn sweep_family(
    params: &SweepParams,
    cfg: &RunConfig,
) -> Result<(Box<dyn Family + Sync>, Option<String>), CliError> {
    let rank_tol = cfg.tolerances.rank_tol;
    let seed = cfg.seed;
    let base = match params.source.as_str() {
        "torus" => {
            let (m, g, flux) = torus_from(&params.model)?;
            if params.family == FamilyKind::Metric {
                let direction = match &params.direction {
                    Some(d) => parse_metric(d, m)?,
                    None => {
                        let mut e = CMatrix::zeros(m, m);
                        e[(0, 0)] = c64(1.0, 0.0);
                        e
                    }
                };
                let path =
                    TorusMetricPath::new(m, g, direction, flux, params.model.orientation, rank_tol)
                        .map_err(CliError::generator)?;
                return Ok((Box::new(path), None));
            }
            torus_model(m, &g, &flux, params.model.orientation)
                .map_err(CliError::generator)?
                .complex
        }
        "random" => random_from(&params.model, seed)?.0,
        path => ComplexDocument::read(Path::new(path))?.complex()?,
    };
    cmtorsion::bicomplex::require_valid(&base, cfg.tolerances.validation_tol)?;
    let gen_seed = seed ^ 0x9e37_79b9_7f4a_7c15;
    let (kind, generator, label) = match params.family {
        FamilyKind::Metric => (
            ConjugationKind::Metric,
            random_even(base.n0, base.n1, params.scale, gen_seed),
            format!("alpha random scale={} seed={seed}", params.scale),
        ),
        FamilyKind::Flux => (
            ConjugationKind::Flux,
            generator(params.beta_kind, base.n0, base.n1, params.scale, gen_seed),
            format!(
                "beta {:?} scale={} seed={seed}",
                params.beta_kind, params.scale
            )
            .to_lowercase(),
        ),
    };
    let family = ConjugationFamily::new(kind, base, generator, rank_tol)?;
    Ok((Box::new(family), Some(label)))
}

pub fn sweep_cmd(
    params: &SweepParams,
    report_path: Option<&Path>,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Outcome {
    let (family, label) = sweep_family(params, cfg)?;
    let pool = cfg.pool()?;
    let mut reports = Vec::new();
    for cut in cfg.cuts() {
        for &eps in &cfg.fd_eps {
            let r = pool.install(|| {
                variation_report(family.as_ref(), &params.grid, cut, eps, &cfg.tolerances)
            });
            reports.push(r);
        }
    }
    let pass = reports.iter().all(VariationReport::pass);
    let json = SweepJson {
        command: "sweep",
        source: &params.source,
        family: family.name(),
        transport: family.transport_name(),
        generator: label,
        seed: cfg.seed,
        pass,
        reports: reports.iter().map(report_json).collect(),
    };
    if let Some(path) = report_path {
        let file = std::fs::File::create(path)?;
        jsonfmt::write(std::io::BufWriter::new(file), &json)?;
    }
    match cfg.format {
        OutputFormat::Json => emit(out, &json)?,
        OutputFormat::Table => {
            for r in &reports {
                write_table(out, r)?;
            }
            writeln!(
                out,
                "{}",
                if pass {
                    "sweep passed"
                } else {
                    "sweep FAILED tolerance policy"
                }
            )?;
        }
    }
    Ok(if pass {
        ExitCode::Ok
    } else {
        ExitCode::Failure
    })
}

// --------------------------------------------------------------- selftest

#[derive(Serialize)]
struct SuiteJson {
    suite: String,
    passed: usize,
    failed: usize,
    first_failure: Option<FailureJson>,
    reproduce: Option<String>,
}

#[derive(Serialize)]
struct FailureJson {
    check: String,
    seed: u64,
    residual: f64,
    threshold: f64,
}

#[derive(Serialize)]
struct SelftestJson {
    command: &'static str,
    pass: bool,
    suites: Vec<SuiteJson>,
}

pub fn selftest_cmd(
    suites: &[Suite],
    first_seed: u64,
    seeds: u64,
    tolerance: Option<f64>,
    cfg: &RunConfig,
    out: &mut dyn Write,
) -> Outcome {
    let opts = SelftestOptions {
        suites: if suites.is_empty() {
            Suite::ALL.to_vec()
        } else {
            suites.to_vec()
        },
        first_seed,
        seeds,
        tolerance,
    };
    let reports = selftest::run(&opts);
    let pass = reports.iter().all(|r| r.failed == 0);
    match cfg.format {
        OutputFormat::Json => emit(
            out,
            &SelftestJson {
                command: "selftest",
                pass,
                suites: reports
                    .iter()
                    .map(|r| SuiteJson {
                        suite: r.suite.to_string(),
                        passed: r.passed,
                        failed: r.failed,
                        first_failure: r.first_failure.as_ref().map(|f| FailureJson {
                            check: f.check.clone(),
                            seed: f.seed,
                            residual: f.residual,
                            threshold: f.threshold,
                        }),
                        reproduce: r.reproduction(tolerance),
                    })
                    .collect(),
            },
        )?,
        OutputFormat::Table => {
            for r in &reports {
                writeln!(
                    out,
                    "{:<10} {:>5} passed {:>5} failed",
                    r.suite, r.passed, r.failed
                )?;
                if let (Some(f), Some(line)) = (&r.first_failure, r.reproduction(tolerance)) {
                    writeln!(
                        out,
                        "  first failure: {} (seed {}, residual {:.3e} > {:.3e})",
                        f.check, f.seed, f.residual, f.threshold
                    )?;
                    writeln!(out, "  reproduce: {line}")?;
                }
            }
        }
    }
    Ok(if pass {
        ExitCode::Ok
    } else {
        ExitCode::Failure
    })
}
