//! One-parameter deformation families and finite-difference checks of the
//! first-order variation of the torsion.
//!
//! A family supplies the complex at each parameter together with the maps
//! identifying its (co)homology reference bases with those at parameter 0.
//! The predicted rate is minus the supertrace of the generator compressed to
//! the `[0, lambda]` part of the Laplacian spectrum.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use rayon::prelude::*;

use crate::bicomplex::{spectral_truncate, BiComplex, Cut, EvenOp};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::models::{chirality_phase, torus_model, Form, WedgeModel};
use crate::numkit::{c64, CMatrix, C64, ZERO};
use crate::torsion::{truncated_with_split, ReferenceBases};

/// `sum_k (-1)^k Tr(op_k P_k)`; with a projector, it must commute with `op`.
pub fn supertrace(op: &EvenOp, projector: Option<&EvenOp>, tol: f64) -> Result<C64> {
    let Some(p) = projector else {
        return Ok(op.supertrace());
    };
    if p.dims() != op.dims() {
        return Err(Error::Shape(format!(
            "projector dims {:?} differ from operator dims {:?}",
            p.dims(),
            op.dims()
        )));
    }
    for k in 0..2 {
        let (a, q) = (op.block(k), p.block(k));
        let residual = a.commutator(q).frobenius_norm();
        if residual > tol * (a.frobenius_norm() * q.frobenius_norm()).max(1.0) {
            return Err(Error::Restriction { residual });
        }
    }
    Ok(compressed_supertrace(op, p))
}

/// `sum_k (-1)^k Tr(P_k op_k P_k)` for idempotents `P_k`, no commutation check.
pub fn compressed_supertrace(op: &EvenOp, projector: &EvenOp) -> C64 {
    let tr = |k: usize| op.block(k).matmul(projector.block(k)).trace();
    tr(0) - tr(1)
}

/// A smooth one-parameter family of bi-complexes with explicit determinant
/// line transport.
pub trait Family: Sync {
    fn name(&self) -> String;

    fn transport_name(&self) -> String;

    fn complex_at(&self, t: f64) -> Result<BiComplex>;

    /// Maps carrying the cohomology and homology reference bases from
    /// parameter 0 to `t`.
    fn transport(&self, t: f64) -> Result<(EvenOp, EvenOp)>;

    /// Operator whose compressed supertrace, negated, is the predicted rate.
    fn generator(&self, t: f64) -> Result<EvenOp>;

    /// `(X, Y)` with `d' = [X, d]` and `d*' = [Y, d*]` at `t`.
    fn exact_generators(&self, t: f64) -> Result<(EvenOp, EvenOp)>;

    fn base_bases(&self) -> &ReferenceBases;

    /// Whether the full torsion is expected to be constant along the family.
    fn full_invariant(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConjugationKind {
    /// `d` fixed, `d*(u) = exp(-u a) d* exp(u a)`.
    Metric,
    /// `d(v) = exp(v b) d exp(-v b)`, `d*(v) = exp(-v b) d* exp(v b)`.
    Flux,
}

#[derive(Debug, Clone)]
pub struct ConjugationFamily {
    pub kind: ConjugationKind,
    pub base: BiComplex,
    pub generator: EvenOp,
    pub bases: ReferenceBases,
}

impl ConjugationFamily {
    pub fn new(
        kind: ConjugationKind,
        base: BiComplex,
        generator: EvenOp,
        rank_tol: f64,
    ) -> Result<Self> {
        if generator.dims() != (base.n0, base.n1) {
            return Err(Error::Shape(format!(
                "generator dims {:?} differ from complex dims ({}, {})",
                generator.dims(),
                base.n0,
                base.n1
            )));
        }
        let bases = ReferenceBases::for_complex(&base, rank_tol);
        Ok(Self {
            kind,
            base,
            generator,
            bases,
        })
    }

    fn exp(&self, s: f64) -> Result<EvenOp> {
        self.generator.scale(c64(s, 0.0)).expm()
    }
}

impl Family for ConjugationFamily {
    fn name(&self) -> String {
        match self.kind {
            ConjugationKind::Metric => "metric-conjugation".into(),
            ConjugationKind::Flux => "flux-conjugation".into(),
        }
    }

    fn transport_name(&self) -> String {
        match self.kind {
            ConjugationKind::Metric => "cohomology fixed; homology by exp(-u alpha)".into(),
            ConjugationKind::Flux => "cohomology by exp(v beta); homology by exp(-v beta)".into(),
        }
    }

    fn complex_at(&self, t: f64) -> Result<BiComplex> {
        let (fwd, back) = (self.exp(t)?, self.exp(-t)?);
        let ds = self.base.ds.sandwich(&back, &fwd);
        let d = match self.kind {
            ConjugationKind::Metric => self.base.d.clone(),
            ConjugationKind::Flux => self.base.d.sandwich(&fwd, &back),
        };
        BiComplex::from_ops(d, ds)
    }

    fn transport(&self, t: f64) -> Result<(EvenOp, EvenOp)> {
        let (n0, n1) = (self.base.n0, self.base.n1);
        let coh = match self.kind {
            ConjugationKind::Metric => EvenOp::identity(n0, n1),
            ConjugationKind::Flux => self.exp(t)?,
        };
        Ok((coh, self.exp(-t)?))
    }

    fn generator(&self, _t: f64) -> Result<EvenOp> {
        Ok(self.generator.clone())
    }

    fn exact_generators(&self, _t: f64) -> Result<(EvenOp, EvenOp)> {
        let (n0, n1) = (self.base.n0, self.base.n1);
        let minus = self.generator.scale(c64(-1.0, 0.0));
        Ok(match self.kind {
            ConjugationKind::Metric => (EvenOp::zeros(n0, n1), minus),
            ConjugationKind::Flux => (self.generator.clone(), minus),
        })
    }

    fn base_bases(&self) -> &ReferenceBases {
        &self.bases
    }
}

/// Torus model along the metric path `g(u) = g0 + u g1` with fixed flux.
#[derive(Debug, Clone)]
pub struct TorusMetricPath {
    pub m: usize,
    pub g0: CMatrix,
    pub g1: CMatrix,
    pub flux: Form,
    pub orientation: i8,
    model: WedgeModel,
    gamma0: CMatrix,
    bases: ReferenceBases,
}

/// Complex-step increment for derivatives of the chirality.
const STEP: f64 = 1e-20;

impl TorusMetricPath {
    pub fn new(
        m: usize,
        g0: CMatrix,
        g1: CMatrix,
        flux: Form,
        orientation: i8,
        rank_tol: f64,
    ) -> Result<Self> {
        if g1.shape() != g0.shape() {
            return Err(Error::Metric(
                "metric path direction has the wrong shape".into(),
            ));
        }
        let base = torus_model(m, &g0, &flux, orientation)?;
        let bases = ReferenceBases::for_complex(&base.complex, rank_tol);
        Ok(Self {
            m,
            g0,
            g1,
            flux,
            orientation,
            model: base.model,
            gamma0: base.gamma,
            bases,
        })
    }

    pub fn metric_at(&self, u: f64) -> CMatrix {
        &self.g0 + &self.g1.scale_real(u)
    }

    pub fn gamma_at(&self, u: f64) -> Result<CMatrix> {
        Ok(torus_model(self.m, &self.metric_at(u), &self.flux, self.orientation)?.gamma)
    }

    /// `d Gamma / du` by a complex step through the metric entries.
    pub fn gamma_derivative(&self, u: f64) -> Result<CMatrix> {
        let g = &self.metric_at(u) + &self.g1.scale(c64(0.0, STEP));
        let s = self.model.signed_star(&g, self.orientation)?;
        let ds = s.map(|z| c64(z.im / STEP, 0.0));
        Ok(ds.scale(chirality_phase(self.m)))
    }
}

impl Family for TorusMetricPath {
    fn name(&self) -> String {
        format!("torus-metric(m={}, flux={})", self.m, self.flux)
    }

    fn transport_name(&self) -> String {
        "cohomology fixed; homology by Gamma(u) Gamma(0)".into()
    }

    fn complex_at(&self, u: f64) -> Result<BiComplex> {
        Ok(torus_model(self.m, &self.metric_at(u), &self.flux, self.orientation)?.complex)
    }

    fn transport(&self, u: f64) -> Result<(EvenOp, EvenOp)> {
        let n = self.model.n_even;
        let hom = self.gamma_at(u)?.matmul(&self.gamma0);
        Ok((EvenOp::identity(n, n), EvenOp::from_full(&hom, n)))
    }

    fn generator(&self, u: f64) -> Result<EvenOp> {
        let alpha = self.gamma_at(u)?.matmul(&self.gamma_derivative(u)?);
        Ok(EvenOp::from_full(&alpha, self.model.n_even))
    }

    fn exact_generators(&self, u: f64) -> Result<(EvenOp, EvenOp)> {
        let alpha = self.generator(u)?;
        let n = self.model.n_even;
        Ok((EvenOp::zeros(n, n), alpha.scale(c64(-1.0, 0.0))))
    }

    fn base_bases(&self) -> &ReferenceBases {
        &self.bases
    }

    fn full_invariant(&self) -> bool {
        self.m % 2 == 1
    }
}

fn low_projectors(c: &BiComplex, cut: Cut, tol: &Tolerances) -> Result<EvenOp> {
    let split = spectral_truncate(c, cut, tol)?;
    Ok(EvenOp {
        even: split.parts[0].low_projector(),
        odd: split.parts[1].low_projector(),
    })
}

/// `-str(G P)` with `G` the family generator and `P` the `[0, lambda]`
/// spectral projector at `t0`.
pub fn predicted_rate<F: Family + ?Sized>(
    family: &F,
    t0: f64,
    cut: Cut,
    tol: &Tolerances,
) -> Result<C64> {
    let p = low_projectors(&family.complex_at(t0)?, cut, tol)?;
    Ok(-compressed_supertrace(&family.generator(t0)?, &p))
}

/// `-str(X P) + str(Y P)` from the generators of both differentials.
pub fn exact_rate<F: Family + ?Sized>(
    family: &F,
    t0: f64,
    cut: Cut,
    tol: &Tolerances,
) -> Result<C64> {
    let p = low_projectors(&family.complex_at(t0)?, cut, tol)?;
    let (x, y) = family.exact_generators(t0)?;
    Ok(compressed_supertrace(&y, &p) - compressed_supertrace(&x, &p))
}

/// Log-torsion of the truncated part and of the full assembly at `t`.
fn log_torsion<F: Family + ?Sized>(
    family: &F,
    t: f64,
    cut: Cut,
    tol: &Tolerances,
) -> Result<(C64, C64, (usize, usize))> {
    let c = family.complex_at(t)?;
    let (coh, hom) = family.transport(t)?;
    let bases = family.base_bases().transport(&coh, &hom);
    let split = spectral_truncate(&c, cut, tol)?;
    let tau = truncated_with_split(&c, &split, &bases, None, tol)?;
    if tau.low_coord == ZERO || tau.coord == ZERO {
        return Err(Error::Degeneracy(format!("torsion vanishes at t = {t}")));
    }
    Ok((tau.low_coord.ln(), tau.coord.ln(), tau.low_dims))
}

/// Shifts `next` by a multiple of `2 pi i` towards `prev`; errors when the
/// remaining phase jump is at least `pi / 2`.
fn unwrap_step(prev: C64, next: C64) -> Result<C64> {
    let mut im = next.im;
    im -= TAU * ((im - prev.im) / TAU).round();
    let jump = (im - prev.im).abs();
    if jump >= FRAC_PI_2 {
        return Err(Error::StencilTooCoarse { jump });
    }
    debug_assert!(jump <= PI);
    Ok(c64(next.re, im))
}

/// Centered differences of the truncated and full log-torsion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdRates {
    pub truncated: C64,
    pub full: C64,
}

impl FdRates {
    /// The part of the full rate not carried by the truncated complex.
    pub fn local_term(&self) -> C64 {
        self.full - self.truncated
    }
}

pub fn fd_rates<F: Family + ?Sized>(
    family: &F,
    t0: f64,
    eps: f64,
    cut: Cut,
    tol: &Tolerances,
) -> Result<FdRates> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Contract(format!(
            "stencil width must be positive, got {eps}"
        )));
    }
    let (lo_m, full_m, dims_m) = log_torsion(family, t0 - eps, cut, tol)?;
    let (lo_0, full_0, dims_0) = log_torsion(family, t0, cut, tol)?;
    let (lo_p, full_p, dims_p) = log_torsion(family, t0 + eps, cut, tol)?;
    if dims_m != dims_0 || dims_p != dims_0 {
        return Err(Error::Split(format!(
            "truncation dimension changes across the stencil at t = {t0}: {dims_m:?}, {dims_0:?}, {dims_p:?}"
        )));
    }
    let centered = |m: C64, z: C64, p: C64| -> Result<C64> {
        let m = unwrap_step(z, m)?;
        let p = unwrap_step(z, p)?;
        Ok((p - m) / (2.0 * eps))
    };
    Ok(FdRates {
        truncated: centered(lo_m, lo_0, lo_p)?,
        full: centered(full_m, full_0, full_p)?,
    })
}

pub fn fd_rate<F: Family + ?Sized>(
    family: &F,
    t0: f64,
    eps: f64,
    cut: Cut,
    tol: &Tolerances,
) -> Result<C64> {
    Ok(fd_rates(family, t0, eps, cut, tol)?.truncated)
}

/// Full-torsion rates above this are policy failures for invariant families.
pub const FULL_RATE_BOUND: f64 = 1e-6;

/// `|fd - predicted| <= 10 eps^2 max(1, |predicted|)`.
pub fn within_policy(fd: C64, predicted: C64, eps: f64) -> bool {
    (fd - predicted).norm() <= 10.0 * eps * eps * predicted.norm().max(1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationRow {
    pub t: f64,
    pub predicted: Option<C64>,
    pub exact: Option<C64>,
    pub fd: Option<C64>,
    pub fd_full: Option<C64>,
    pub local_term: Option<C64>,
    pub abs_err: Option<f64>,
    pub rel_err: Option<f64>,
    pub pass: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VariationReport {
    pub family: String,
    pub transport: String,
    pub cut: Cut,
    pub eps: f64,
    pub full_invariant: bool,
    pub rows: Vec<VariationRow>,
}

impl VariationReport {
    pub fn pass(&self) -> bool {
        self.rows.iter().all(|r| r.pass)
    }
}

fn report_row<F: Family + ?Sized>(
    family: &F,
    t: f64,
    cut: Cut,
    eps: f64,
    tol: &Tolerances,
) -> VariationRow {
    let mut row = VariationRow {
        t,
        predicted: None,
        exact: None,
        fd: None,
        fd_full: None,
        local_term: None,
        abs_err: None,
        rel_err: None,
        pass: false,
        error: None,
    };
    let outcome = (|| -> Result<()> {
        let pred = predicted_rate(family, t, cut, tol)?;
        row.predicted = Some(pred);
        row.exact = Some(exact_rate(family, t, cut, tol)?);
        let fd = fd_rates(family, t, eps, cut, tol)?;
        row.fd = Some(fd.truncated);
        row.fd_full = Some(fd.full);
        row.local_term = Some(fd.local_term());
        let err = (fd.truncated - pred).norm();
        row.abs_err = Some(err);
        row.rel_err = Some(err / pred.norm().max(f64::MIN_POSITIVE));
        row.pass = within_policy(fd.truncated, pred, eps)
            && (!family.full_invariant() || fd.full.norm() <= FULL_RATE_BOUND);
        Ok(())
    })();
    if let Err(e) = outcome {
        row.error = Some(e.to_string());
    }
    row
}

/// Evaluates the grid in parallel; rows come back in grid order.
pub fn variation_report<F: Family + ?Sized>(
    family: &F,
    grid: &[f64],
    cut: Cut,
    eps: f64,
    tol: &Tolerances,
) -> VariationReport {
    let rows = grid
        .par_iter()
        .map(|&t| report_row(family, t, cut, eps, tol))
        .collect();
    VariationReport {
        family: family.name(),
        transport: family.transport_name(),
        cut,
        eps,
        full_invariant: family.full_invariant(),
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{random_bicomplex, random_even, SpectralProfile};
    use crate::numkit::ONE;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn supertrace_examples() {
        let id = EvenOp::identity(3, 2);
        assert_eq!(supertrace(&id, None, 1e-12).unwrap(), ONE);
        let op = EvenOp {
            even: CMatrix::diag_real(&[2.0]),
            odd: CMatrix::diag_real(&[5.0]),
        };
        assert_eq!(supertrace(&op, None, 1e-12).unwrap(), c64(-3.0, 0.0));
        let alpha = EvenOp {
            even: CMatrix::diag_real(&[2.0, 7.0]),
            odd: CMatrix::zeros(0, 0),
        };
        let p = EvenOp {
            even: CMatrix::diag_real(&[0.0, 1.0]),
            odd: CMatrix::zeros(0, 0),
        };
        assert_eq!(supertrace(&alpha, Some(&p), 1e-12).unwrap(), c64(7.0, 0.0));
        let skew = EvenOp {
            even: CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]),
            odd: CMatrix::zeros(0, 0),
        };
        assert!(matches!(
            supertrace(&skew, Some(&p), 1e-12),
            Err(Error::Restriction { .. })
        ));
    }

    #[test]
    fn predicted_rate_examples() {
        let c = random_bicomplex((2, 2), (0, 0), &SpectralProfile::default(), 3).unwrap();
        let beta = random_even(2, 2, 0.5, 11);
        let f =
            ConjugationFamily::new(ConjugationKind::Flux, c.clone(), beta.clone(), 1e-9).unwrap();
        let pred = predicted_rate(&f, 0.0, Cut::Above, &tol()).unwrap();
        assert!((pred + beta.supertrace()).norm() < 1e-12);
        let zero =
            ConjugationFamily::new(ConjugationKind::Flux, c.clone(), EvenOp::zeros(2, 2), 1e-9)
                .unwrap();
        assert_eq!(
            predicted_rate(&zero, 0.0, Cut::Above, &tol()).unwrap(),
            ZERO
        );
        let scalar = EvenOp::identity(2, 2).scale(c64(1.7, 0.0));
        let m = ConjugationFamily::new(ConjugationKind::Metric, c, scalar, 1e-9).unwrap();
        assert!(predicted_rate(&m, 0.0, Cut::Above, &tol()).unwrap().norm() < 1e-14);
    }

    #[test]
    fn constant_family_has_zero_rate() {
        let c = random_bicomplex((3, 3), (1, 1), &SpectralProfile::default(), 5).unwrap();
        let f =
            ConjugationFamily::new(ConjugationKind::Metric, c, EvenOp::zeros(3, 3), 1e-9).unwrap();
        let r = fd_rates(&f, 0.0, 1e-3, Cut::Above, &tol()).unwrap();
        assert!(r.truncated.norm() < 1e-9 && r.full.norm() < 1e-9);
    }

    #[test]
    fn metric_family_matches_prediction() {
        let c = random_bicomplex((4, 4), (0, 0), &SpectralProfile::Independent, 21).unwrap();
        let alpha = random_even(4, 4, 0.5, 22);
        let f = ConjugationFamily::new(ConjugationKind::Metric, c, alpha, 1e-9).unwrap();
        let eps = 1e-3;
        let fd = fd_rate(&f, 0.1, eps, Cut::Above, &tol()).unwrap();
        let pred = predicted_rate(&f, 0.1, Cut::Above, &tol()).unwrap();
        assert!(within_policy(fd, pred, eps), "fd {fd} pred {pred}");
    }

    #[test]
    fn metric_family_truncated_in_gap() {
        let profile = SpectralProfile::Banded {
            lo: 1.0,
            hi: 1.0,
            max_phase: 0.0,
            d_only: 0,
            dstar_only: 0,
        };
        // two pairs at |mu| = 1 plus one harmonic pair; cut between 0 and 1
        let c = random_bicomplex((3, 3), (1, 1), &profile, 8).unwrap();
        let alpha = random_even(3, 3, 0.3, 9);
        let f = ConjugationFamily::new(ConjugationKind::Metric, c, alpha, 1e-9).unwrap();
        let eps = 1e-3;
        let cut = Cut::At(0.5);
        let fd = fd_rate(&f, 0.0, eps, cut, &tol()).unwrap();
        let exact = exact_rate(&f, 0.0, cut, &tol()).unwrap();
        assert!(within_policy(fd, exact, eps), "fd {fd} exact {exact}");
    }

    #[test]
    fn flux_family_rate_is_twice_prediction() {
        let c = random_bicomplex((2, 2), (0, 0), &SpectralProfile::default(), 3).unwrap();
        let beta = random_even(2, 2, 0.5, 4);
        let f = ConjugationFamily::new(ConjugationKind::Flux, c, beta, 1e-9).unwrap();
        let eps = 1e-3;
        let fd = fd_rate(&f, 0.0, eps, Cut::Above, &tol()).unwrap();
        let pred = predicted_rate(&f, 0.0, Cut::Above, &tol()).unwrap();
        let exact = exact_rate(&f, 0.0, Cut::Above, &tol()).unwrap();
        assert!(within_policy(fd, exact, eps));
        assert!((exact - pred * 2.0).norm() < 1e-12);
    }

    #[test]
    fn torus_alpha_matches_star_derivative() -> Result<()> {
        let g0 = CMatrix::diag_real(&[1.0, 1.3, 0.8]);
        let g1 = CMatrix::from_real_rows(&[&[1.0, 0.2, 0.0], &[0.2, 0.0, 0.1], &[0.0, 0.1, -0.3]]);
        let p = TorusMetricPath::new(3, g0, g1, Form::monomial(&[1, 2, 3], 2.0), 1, 1e-9).unwrap();
        let h = 1e-5;
        let central = &p.gamma_at(0.2 + h)? - &p.gamma_at(0.2 - h)?;
        let fd = central.scale_real(0.5 / h);
        let cs = p.gamma_derivative(0.2)?;
        assert!(fd.distance(&cs) < 1e-8);
        let alpha = p.generator(0.2)?;
        let gamma = p.gamma_at(0.2)?;
        assert!(gamma.matmul(&fd).distance(&alpha.to_full()) < 1e-8);
        Ok(())
    }

    #[test]
    fn torus_metric_path_full_rate_vanishes() {
        let g1 = CMatrix::diag_real(&[1.0, 0.0, 0.0]);
        let flux = Form::monomial(&[1, 2, 3], 2.0);
        let p = TorusMetricPath::new(3, CMatrix::identity(3), g1, flux, 1, 1e-9).unwrap();
        let report = variation_report(&p, &[0.0, 0.25, 0.5], Cut::Above, 1e-3, &tol());
        for row in &report.rows {
            assert!(row.error.is_none(), "{:?}", row.error);
            assert!(row.fd_full.unwrap().norm() < 1e-6, "{row:?}");
        }
        assert!(report.pass());
    }

    #[test]
    fn empty_grid_gives_empty_report() {
        let c = BiComplex::zero(1, 1);
        let f =
            ConjugationFamily::new(ConjugationKind::Flux, c, EvenOp::zeros(1, 1), 1e-9).unwrap();
        assert!(variation_report(&f, &[], Cut::Above, 1e-3, &tol())
            .rows
            .is_empty());
    }

    #[test]
    fn unwrap_detects_coarse_stencil() {
        assert!(unwrap_step(c64(0.0, 0.0), c64(0.0, 2.0)).is_err());
        let z = unwrap_step(c64(0.0, 3.1), c64(0.0, -3.1)).unwrap();
        assert!((z.im - (TAU - 3.1)).abs() < 1e-12);
    }
}
