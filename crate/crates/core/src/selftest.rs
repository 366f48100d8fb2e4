//! Seeded self-check suites over the whole engine.
//!
//! Every check reduces to a nonnegative residual compared with a threshold;
//! a global override replaces all thresholds, which makes it easy to force
//! failures or to tighten the run.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bicomplex::{laplacian, spectral_truncate, validate, BiComplex, Cut, EvenOp, OddOp};
use crate::config::Tolerances;
use crate::deform::{
    fd_rates, predicted_rate, ConjugationFamily, ConjugationKind, TorusMetricPath,
};
use crate::detline::{fusion_sign, graded_fusion_sign, wedge_coord};
use crate::error::{Error, Result};
use crate::models::{
    chirality, random_bicomplex, random_even, torus_model, Form, SpectralProfile, WedgeModel,
};
use crate::numkit::{c64, det, eig_clusters, inverse, svd, CMatrix, C64, ONE};
use crate::torsion::{
    agmon_log_det, torsion_acyclic, torsion_definition, torsion_truncated, ReferenceBases,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Numkit,
    Detline,
    Bicomplex,
    Torsion,
    Models,
    Deform,
}

impl Suite {
    pub const ALL: [Suite; 6] = [
        Suite::Numkit,
        Suite::Detline,
        Suite::Bicomplex,
        Suite::Torsion,
        Suite::Models,
        Suite::Deform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Numkit => "numkit",
            Suite::Detline => "detline",
            Suite::Bicomplex => "bicomplex",
            Suite::Torsion => "torsion",
            Suite::Models => "models",
            Suite::Deform => "deform",
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|suite| suite.name() == s)
            .ok_or_else(|| Error::Contract(format!("unknown suite `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    pub suites: Vec<Suite>,
    pub first_seed: u64,
    pub seeds: u64,
    /// Replaces every check threshold when set.
    pub tolerance: Option<f64>,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            suites: Suite::ALL.to_vec(),
            first_seed: 0,
            seeds: 16,
            tolerance: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub check: String,
    pub seed: u64,
    pub residual: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub passed: usize,
    pub failed: usize,
    pub first_failure: Option<Failure>,
}

impl SuiteReport {
    /// Command line reproducing the first failure on its own.
    pub fn reproduction(&self, tolerance: Option<f64>) -> Option<String> {
        self.first_failure.as_ref().map(|f| {
            let mut line = format!(
                "cmtorsion selftest --suite {} --seed {} --seeds 1",
                self.suite, f.seed
            );
            if let Some(t) = tolerance {
                line.push_str(&format!(" --tol {t:e}"));
            }
            line
        })
    }
}

struct Recorder {
    seed: u64,
    tolerance: Option<f64>,
    passed: usize,
    failed: usize,
    first_failure: Option<Failure>,
}

impl Recorder {
    fn check(&mut self, name: &str, residual: f64, default_threshold: f64) {
        let threshold = self.tolerance.unwrap_or(default_threshold);
        if residual <= threshold {
            self.passed += 1;
        } else {
            self.failed += 1;
            if self.first_failure.is_none() {
                self.first_failure = Some(Failure {
                    check: name.to_string(),
                    seed: self.seed,
                    residual,
                    threshold,
                });
            }
        }
    }

    /// Errors count as failures with infinite residual.
    fn run(&mut self, name: &str, threshold: f64, f: impl FnOnce() -> Result<f64>) {
        let r = f().unwrap_or(f64::INFINITY);
        self.check(name, if r.is_nan() { f64::INFINITY } else { r }, threshold);
    }
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| {
        c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

fn near_identity(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    &CMatrix::identity(n) + &rand_matrix(rng, n, n).scale_real(0.3)
}

/// A conjugated rank normal form with its torsion in closed form, and the
/// moduli of its nonzero Laplacian eigenvalues.
fn oracle_complex(rng: &mut ChaCha8Rng) -> Result<(BiComplex, ReferenceBases, C64, Vec<f64>)> {
    let pairs = rng.gen_range(0..=4);
    let (h0, h1) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
    let (n0, n1) = (pairs + h0, pairs + h1);
    let mut d = OddOp::zeros(n0, n1);
    let mut ds = OddOp::zeros(n0, n1);
    let mut tau = ONE;
    let mut moduli = Vec::new();
    for p in 0..pairs {
        let a = c64(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
        let b = c64(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
        moduli.push((a * b).norm());
        if rng.gen_bool(0.5) {
            d.eo[(p, p)] = a;
            ds.oe[(p, p)] = b;
            tau *= a * b;
        } else {
            d.oe[(p, p)] = a;
            ds.eo[(p, p)] = b;
            tau /= a * b;
        }
    }
    let s = EvenOp {
        even: near_identity(rng, n0),
        odd: near_identity(rng, n1),
    };
    let sinv = EvenOp {
        even: inverse(&s.even)?,
        odd: inverse(&s.odd)?,
    };
    let c = BiComplex::from_ops(d.sandwich(&s, &sinv), ds.sandwich(&s, &sinv))?;
    let harm = [s.even.columns(pairs, n0), s.odd.columns(pairs, n1)];
    let bases = ReferenceBases {
        coh: harm.clone(),
        hom: harm,
        coh_id: "oracle".into(),
        hom_id: "oracle".into(),
    };
    Ok((c, bases, tau, moduli))
}

fn gap_cuts(moduli: &[f64]) -> Vec<f64> {
    let mut m = moduli.to_vec();
    m.push(0.0);
    m.sort_by(f64::total_cmp);
    let mut cuts: Vec<f64> = m
        .windows(2)
        .filter(|w| w[1] - w[0] > 0.05)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    cuts.push(2.0 * m.last().copied().unwrap_or(0.0) + 1.0);
    cuts
}

fn numkit_suite(r: &mut Recorder, rng: &mut ChaCha8Rng) {
    let n = rng.gen_range(1..=10);
    let a = near_identity(rng, n);
    let b = near_identity(rng, n);
    r.run("det(AB) = det(A) det(B)", 1e-10, || {
        Ok(rel(det(&a.matmul(&b))?, det(&a)? * det(&b)?))
    });
    let m = rand_matrix(rng, n, n);
    r.run("cluster projectors sum to I", 1e-9, || {
        let set = eig_clusters(&m, 1e-7)?;
        let sum = set
            .clusters
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, c| &acc + &c.projector);
        Ok(sum.distance(&CMatrix::identity(n)))
    });
    let w = rand_matrix(rng, n, n + 2);
    r.run("svd reconstruction", 1e-12, || {
        let s = svd(&w);
        let sigma = CMatrix::diag_real(&s.s);
        let k = s.s.len();
        let back =
            s.u.columns(0, k)
                .matmul(&sigma)
                .matmul(&s.v.columns(0, k).adjoint());
        Ok(back.distance(&w) / w.frobenius_norm().max(1.0))
    });
}

fn detline_suite(r: &mut Recorder, rng: &mut ChaCha8Rng) {
    let dv = rng.gen_range(0..=6);
    let dw = rng.gen_range(0..=6);
    let n = dv + dw;
    let mut v = CMatrix::zeros(n, dv);
    v.set_block(0, 0, &near_identity(rng, dv));
    let mut w = CMatrix::zeros(n, dw);
    w.set_block(dv, 0, &near_identity(rng, dw));
    r.run("fusion swap sign", 1e-12, || {
        let id = CMatrix::identity(n);
        let vw = wedge_coord(&CMatrix::hstack(n, &[&v, &w]), &id)?;
        let wv = wedge_coord(&CMatrix::hstack(n, &[&w, &v]), &id)?;
        Ok(rel(vw, wv * f64::from(fusion_sign(dv, dw))))
    });
    let dims: [usize; 4] = std::array::from_fn(|_| rng.gen_range(0..=6));
    let want = if (dims[1] * dims[2]) % 2 == 0 { 1 } else { -1 };
    let got = graded_fusion_sign((dims[0], dims[1]), (dims[2], dims[3]));
    r.check("graded fusion sign", f64::from((got - want).abs()), 0.0);
}

fn bicomplex_suite(r: &mut Recorder, rng: &mut ChaCha8Rng, tol: &Tolerances) {
    let p = rng.gen_range(0..=4);
    let (h0, h1) = (rng.gen_range(0..=2), rng.gen_range(0..=2));
    let seed = rng.gen();
    let made = random_bicomplex(
        (p + h0, p + h1),
        (h0, h1),
        &SpectralProfile::Independent,
        seed,
    );
    r.run("generated complex validates", 1.0, || {
        let c = made.clone()?;
        Ok(validate(&c, tol.validation_tol)
            .residuals
            .iter()
            .map(|x| x.residual / x.bound)
            .fold(0.0, f64::max))
    });
    r.run("differentials commute with the Laplacian", 1e-10, || {
        let c = made.clone()?;
        let lap = laplacian(&c).to_full();
        let worst = [&c.d, &c.ds]
            .iter()
            .map(|op| op.to_full().commutator(&lap).frobenius_norm())
            .fold(0.0, f64::max);
        Ok(worst / c.scale().powi(3))
    });
    r.run("cohomology dimensions as requested", 0.0, || {
        let c = made.clone()?;
        let b = crate::bicomplex::cohomology(&c, tol.rank_tol).betti();
        Ok(((b.0 as f64) - h0 as f64).abs() + ((b.1 as f64) - h1 as f64).abs())
    });
}

fn torsion_suite(r: &mut Recorder, rng: &mut ChaCha8Rng, tol: &Tolerances) {
    let made = oracle_complex(rng);
    r.run("definition matches closed form", 1e-9, || {
        let (c, bases, tau, _) = made.as_ref().map_err(Clone::clone)?;
        Ok(rel(torsion_definition(c, Some(bases), tol)?.coord, *tau))
    });
    r.run("truncations agree across cuts", 1e-7, || {
        let (c, bases, tau, moduli) = made.as_ref().map_err(Clone::clone)?;
        let mut worst: f64 = 0.0;
        for l in gap_cuts(moduli) {
            let t = torsion_truncated(c, Cut::At(l), Some(bases), None, tol)?;
            worst = worst.max(rel(t.coord, *tau));
        }
        Ok(worst)
    });
    let n = rng.gen_range(1..=5);
    let a = near_identity(rng, n);
    let b = near_identity(rng, n);
    r.run("acyclic formula matches definition", 1e-8, || {
        let c = BiComplex::new(
            a.clone(),
            CMatrix::zeros(n, n),
            CMatrix::zeros(n, n),
            b.clone(),
        )?;
        Ok(rel(
            torsion_acyclic(&c, tol)?,
            torsion_definition(&c, None, tol)?.coord,
        ))
    });
    let ev: Vec<C64> = (0..n)
        .map(|_| {
            C64::from_polar(
                rng.gen_range(0.3..3.0),
                rng.gen_range(-0.5..0.5) + std::f64::consts::FRAC_PI_2,
            )
        })
        .collect();
    r.run("Agmon determinant is angle independent", 1e-10, || {
        let m = a.matmul(&CMatrix::diag(&ev)).matmul(&inverse(&a)?);
        let want: C64 = ev.iter().product();
        let mut worst: f64 = 0.0;
        for theta in [
            std::f64::consts::FRAC_PI_4,
            std::f64::consts::PI,
            1.75 * std::f64::consts::PI,
        ] {
            worst = worst.max(rel(agmon_log_det(&m, theta, tol.cluster_tol)?.exp(), want));
        }
        Ok(worst)
    });
}

fn random_metric(rng: &mut ChaCha8Rng, m: usize) -> CMatrix {
    let x = CMatrix::from_fn(m, m, |_, _| c64(rng.gen_range(-1.0..1.0), 0.0));
    &CMatrix::identity(m) + &x.transpose().matmul(&x).scale_real(1.0 / m as f64)
}

fn models_suite(r: &mut Recorder, rng: &mut ChaCha8Rng) {
    let m = rng.gen_range(1..=6);
    let g = random_metric(rng, m);
    r.run("chirality squares to identity", 1e-12, || {
        let gamma = chirality(m, &g, 1)?;
        Ok(gamma.matmul(&gamma).distance(&CMatrix::identity(1 << m)))
    });
    let m = rng.gen_range(3..=6);
    let mut terms = Vec::new();
    for mask in 1u32..(1 << m) {
        let deg = mask.count_ones();
        if deg % 2 == 1 && deg >= 3 && rng.gen_bool(0.5) {
            terms.push((mask, c64(rng.gen_range(-2.0..2.0), 0.0)));
        }
    }
    let flux = Form { terms };
    let g = random_metric(rng, m);
    r.run("twisted differentials square to zero", 1e-11, || {
        let t = torus_model(m, &g, &flux, 1)?;
        let (a, b) = t.complex.d.square();
        let (c, d) = t.complex.ds.square();
        let scale = t.complex.scale().powi(2);
        Ok(
            (a.frobenius_norm() + b.frobenius_norm() + c.frobenius_norm() + d.frobenius_norm())
                / scale,
        )
    });
    r.run("flux wedge squares to zero exactly", 0.0, || {
        // exactness needs integer coefficients
        let ints = Form {
            terms: flux
                .terms
                .iter()
                .map(|&(k, c)| (k, c64(c.re.round(), 0.0)))
                .collect(),
        };
        let h = WedgeModel::new(m)?.wedge_matrix(&ints)?;
        Ok(h.matmul(&h).max_abs())
    });
}

fn deform_suite(r: &mut Recorder, rng: &mut ChaCha8Rng, tol: &Tolerances) {
    let eps = 1e-3;
    let p = rng.gen_range(1..=4);
    let seed: u64 = rng.gen();
    r.run(
        "metric family rate matches the supertrace",
        10.0 * eps * eps,
        || {
            let c = random_bicomplex((p, p), (0, 0), &SpectralProfile::Independent, seed)?;
            let alpha = random_even(p, p, 0.5, seed ^ 0x5a5a);
            let f = ConjugationFamily::new(ConjugationKind::Metric, c, alpha, tol.rank_tol)?;
            let fd = fd_rates(&f, 0.0, eps, Cut::Above, tol)?.truncated;
            let pred = predicted_rate(&f, 0.0, Cut::Above, tol)?;
            Ok((fd - pred).norm() / pred.norm().max(1.0))
        },
    );
    let g1 = CMatrix::from_fn(3, 3, |i, j| {
        if i == j {
            c64(rng.gen_range(-0.5..0.5), 0.0)
        } else {
            c64(0.1, 0.0)
        }
    });
    let t = rng.gen_range(0.5..2.5);
    r.run("odd torus full torsion is metric independent", 1e-6, || {
        let flux = Form::monomial(&[1, 2, 3], t);
        let path =
            TorusMetricPath::new(3, CMatrix::identity(3), g1.clone(), flux, 1, tol.rank_tol)?;
        Ok(fd_rates(&path, 0.2, eps, Cut::Above, tol)?.full.norm())
    });
    r.run("spectral projector is idempotent", 1e-9, || {
        let c = random_bicomplex((p + 1, p + 1), (1, 1), &SpectralProfile::default(), seed)?;
        let s = spectral_truncate(&c, Cut::At(0.1), tol)?;
        let pr = s.parts[0].low_projector();
        Ok(pr.matmul(&pr).distance(&pr))
    });
}

pub fn run_suite(suite: Suite, opts: &SelftestOptions) -> SuiteReport {
    let tol = Tolerances::default();
    let mut rec = Recorder {
        seed: 0,
        tolerance: opts.tolerance,
        passed: 0,
        failed: 0,
        first_failure: None,
    };
    for seed in opts.first_seed..opts.first_seed.saturating_add(opts.seeds) {
        rec.seed = seed;
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((suite as u64) << 48));
        match suite {
            Suite::Numkit => numkit_suite(&mut rec, &mut rng),
            Suite::Detline => detline_suite(&mut rec, &mut rng),
            Suite::Bicomplex => bicomplex_suite(&mut rec, &mut rng, &tol),
            Suite::Torsion => torsion_suite(&mut rec, &mut rng, &tol),
            Suite::Models => models_suite(&mut rec, &mut rng),
            Suite::Deform => deform_suite(&mut rec, &mut rng, &tol),
        }
    }
    SuiteReport {
        suite,
        passed: rec.passed,
        failed: rec.failed,
        first_failure: rec.first_failure,
    }
}

pub fn run(opts: &SelftestOptions) -> Vec<SuiteReport> {
    opts.suites.iter().map(|&s| run_suite(s, opts)).collect()
}
