//! Concrete bi-complexes: constant forms on a flat torus twisted by a constant
//! flux, the chirality involution built from a metric, exponentiated even
//! forms, abstract Dolbeault-type wrappers and seeded random complexes.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::bicomplex::{require_valid, BiComplex, EvenOp, OddOp};
use crate::error::{Error, Result};
use crate::numkit::{c64, det, expm, inverse, CMatrix, C64, ONE, ZERO};

/// A constant differential form `sum_I c_I e^I`, indices stored as bitmasks
/// (bit `i` set for `e^{i+1}`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Form {
    pub terms: Vec<(u32, C64)>,
}

impl Form {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(indices: &[usize], coeff: f64) -> Self {
        let mask = indices.iter().fold(0u32, |m, &i| m | (1 << (i - 1)));
        Self {
            terms: vec![(mask, c64(coeff, 0.0))],
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            terms: self.terms.iter().map(|&(m, c)| (m, c * s)).collect(),
        }
    }

    pub fn degrees(&self) -> Vec<u32> {
        self.terms.iter().map(|(m, _)| m.count_ones()).collect()
    }

    pub fn max_index(&self) -> usize {
        self.terms
            .iter()
            .map(|(m, _)| 32 - m.leading_zeros() as usize)
            .max()
            .unwrap_or(0)
    }
}

impl fmt::Display for Form {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .terms
            .iter()
            .map(|&(mask, c)| {
                let idx: String = if mask == 0 {
                    "0".into()
                } else {
                    (0..32)
                        .filter(|b| mask & (1 << b) != 0)
                        .map(|b| char::from_digit(b + 1, 10).unwrap_or('?'))
                        .collect()
                };
                if c.im == 0.0 {
                    format!("{idx}:{}", c.re)
                } else {
                    format!("{idx}:{}{:+}i", c.re, c.im)
                }
            })
            .collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Parses `"123:2.0,145:0.5"`; the index string lists 1-based indices as
/// digits, `0` denotes the constant form.
impl FromStr for Form {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for item in s.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            let (idx, coeff) = item
                .split_once(':')
                .ok_or_else(|| Error::Contract(format!("form term `{item}` lacks `:`")))?;
            let coeff: f64 = coeff
                .trim()
                .parse()
                .map_err(|_| Error::Contract(format!("bad coefficient in `{item}`")))?;
            let idx = idx.trim();
            let mut mask = 0u32;
            if idx != "0" {
                for ch in idx.chars() {
                    let d = ch
                        .to_digit(10)
                        .filter(|&d| d >= 1)
                        .ok_or_else(|| Error::Contract(format!("bad index `{ch}` in `{item}`")))?;
                    let bit = 1u32 << (d - 1);
                    if mask & bit != 0 {
                        return Err(Error::Contract(format!("repeated index in `{item}`")));
                    }
                    mask |= bit;
                }
            }
            terms.push((mask, c64(coeff, 0.0)));
        }
        Ok(Self { terms })
    }
}

fn bits(mask: u32) -> Vec<u32> {
    (0..32).filter(|b| mask & (1 << b) != 0).collect()
}

/// Sign of sorting the concatenation `(J, I)` of disjoint index sets.
pub fn wedge_sign(j: u32, i: u32) -> f64 {
    let mut inversions = 0u32;
    for a in bits(j) {
        inversions += (i & ((1u32 << a) - 1)).count_ones();
    }
    if inversions % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn lex_less(a: u32, b: u32) -> std::cmp::Ordering {
    a.count_ones()
        .cmp(&b.count_ones())
        .then_with(|| bits(a).cmp(&bits(b)))
}

/// `Lambda(C^m)` with monomials ordered even-degree first, then odd, each in
/// graded lexicographic order.
#[derive(Debug, Clone)]
pub struct WedgeModel {
    pub m: usize,
    pub basis: Vec<u32>,
    pub n_even: usize,
    index: HashMap<u32, usize>,
}

impl WedgeModel {
    pub fn new(m: usize) -> Result<Self> {
        if m == 0 || m > 9 {
            return Err(Error::Contract(format!(
                "wedge model dimension must be 1..=9, got {m}"
            )));
        }
        let all: Vec<u32> = (0..(1u32 << m)).collect();
        let mut even: Vec<u32> = all
            .iter()
            .copied()
            .filter(|x| x.count_ones() % 2 == 0)
            .collect();
        let mut odd: Vec<u32> = all
            .iter()
            .copied()
            .filter(|x| x.count_ones() % 2 == 1)
            .collect();
        even.sort_by(|a, b| lex_less(*a, *b));
        odd.sort_by(|a, b| lex_less(*a, *b));
        let n_even = even.len();
        let basis: Vec<u32> = even.into_iter().chain(odd).collect();
        let index = basis.iter().enumerate().map(|(i, &m)| (m, i)).collect();
        Ok(Self {
            m,
            basis,
            n_even,
            index,
        })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn position(&self, mask: u32) -> usize {
        self.index[&mask]
    }

    pub fn label(&self, pos: usize) -> String {
        let mask = self.basis[pos];
        if mask == 0 {
            "1".into()
        } else {
            format!(
                "e{}",
                bits(mask)
                    .iter()
                    .map(|b| (b + 1).to_string())
                    .collect::<String>()
            )
        }
    }

    fn check_form(&self, form: &Form) -> Result<()> {
        if form.max_index() > self.m {
            return Err(Error::Contract(format!(
                "form uses index {} beyond dimension {}",
                form.max_index(),
                self.m
            )));
        }
        Ok(())
    }

    /// Matrix of `form ^ .` on the full space.
    pub fn wedge_matrix(&self, form: &Form) -> Result<CMatrix> {
        self.check_form(form)?;
        let n = self.dim();
        let mut w = CMatrix::zeros(n, n);
        for (col, &i) in self.basis.iter().enumerate() {
            for &(j, c) in &form.terms {
                if i & j == 0 {
                    let row = self.position(i | j);
                    w[(row, col)] += c * wedge_sign(j, i);
                }
            }
        }
        Ok(w)
    }

    /// Hodge star for a (possibly complex) symmetric metric, multiplied by the
    /// degree sign `(-1)^{q(q+1)/2}`. Polynomial in the entries of `g^{-1}`
    /// times `sqrt(det g)`, so it extends holomorphically off real metrics.
    pub fn signed_star(&self, g: &CMatrix, orientation: i8) -> Result<CMatrix> {
        if g.shape() != (self.m, self.m) {
            return Err(Error::Metric(format!(
                "metric is {}x{}, expected {}x{}",
                g.rows(),
                g.cols(),
                self.m,
                self.m
            )));
        }
        let ginv = inverse(g).map_err(|e| Error::Metric(e.to_string()))?;
        let vol = det(g)?.sqrt() * f64::from(orientation.signum());
        let full = (1u32 << self.m) - 1;
        let n = self.dim();
        let mut s = CMatrix::zeros(n, n);
        for (col, &i) in self.basis.iter().enumerate() {
            let q = i.count_ones();
            let ib = bits(i);
            let degree_sign = if (q * (q + 1) / 2) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            for &k in self.basis.iter().filter(|k| k.count_ones() == q) {
                let kb = bits(k);
                let minor = CMatrix::from_fn(q as usize, q as usize, |a, b| {
                    ginv[(kb[a] as usize, ib[b] as usize)]
                });
                let g_ki = det(&minor)?;
                if g_ki == ZERO {
                    continue;
                }
                let kc = full & !k;
                let row = self.position(kc);
                s[(row, col)] += vol * g_ki * (wedge_sign(k, kc) * degree_sign);
            }
        }
        Ok(s)
    }
}

/// `i^r` with `r = (m+1)/2` for odd `m` and `m/2` for even `m`.
pub fn chirality_phase(m: usize) -> C64 {
    let r = if m % 2 == 1 { (m + 1) / 2 } else { m / 2 };
    match r % 4 {
        0 => ONE,
        1 => c64(0.0, 1.0),
        2 => c64(-1.0, 0.0),
        _ => c64(0.0, -1.0),
    }
}

pub fn check_metric(g: &CMatrix) -> Result<()> {
    let m = g.rows();
    if !g.is_square() || m == 0 {
        return Err(Error::Metric(
            "metric must be a nonempty square matrix".into(),
        ));
    }
    if g.as_slice()
        .iter()
        .any(|z| z.im != 0.0 || !z.re.is_finite())
    {
        return Err(Error::Metric("metric entries must be finite reals".into()));
    }
    if g.distance(&g.transpose()) > 1e-12 * g.frobenius_norm() {
        return Err(Error::Metric("metric is not symmetric".into()));
    }
    for k in 1..=m {
        let lead = det(&g.block(0, k, 0, k))?;
        if lead.re <= 0.0 {
            return Err(Error::Metric(format!(
                "metric is not positive definite (leading minor {k} = {:.3e})",
                lead.re
            )));
        }
    }
    Ok(())
}

/// `Gamma = i^r (-1)^{q(q+1)/2} *` on `Lambda(C^m)`.
pub fn chirality(m: usize, g: &CMatrix, orientation: i8) -> Result<CMatrix> {
    check_metric(g)?;
    let model = WedgeModel::new(m)?;
    Ok(model.signed_star(g, orientation)?.scale(chirality_phase(m)))
}

/// An odd square-zero operator used to twist a differential.
#[derive(Debug, Clone)]
pub struct FluxOperator {
    pub h: OddOp,
    pub description: String,
}

impl FluxOperator {
    /// Wedge product with a constant odd form of degree at least three.
    pub fn from_form(model: &WedgeModel, form: &Form) -> Result<Self> {
        for (deg, &(mask, _)) in form.degrees().into_iter().zip(&form.terms) {
            if deg % 2 == 0 || deg < 3 {
                return Err(Error::FluxDegree(format!(
                    "flux component {} has degree {deg}; only odd degrees >= 3 are allowed",
                    Form {
                        terms: vec![(mask, ONE)]
                    }
                )));
            }
        }
        let w = model.wedge_matrix(form)?;
        Ok(Self {
            h: OddOp::from_full(&w, model.n_even),
            description: format!("wedge by {form}"),
        })
    }

    pub fn from_matrix(h: OddOp, description: impl Into<String>) -> Self {
        Self {
            h,
            description: description.into(),
        }
    }

    /// `|h^2|` relative to `max(|h|^2, 1)`.
    pub fn square_residual(&self) -> f64 {
        let (a, b) = self.h.square();
        (a.frobenius_norm() + b.frobenius_norm()) / self.h.norm().powi(2).max(1.0)
    }
}

/// A Z-graded cochain complex `C^0 -> C^1 -> ... -> C^N`.
#[derive(Debug, Clone)]
pub struct ZGradedComplex {
    pub dims: Vec<usize>,
    /// `maps[q] : C^q -> C^{q+1}`, shape `dims[q+1] x dims[q]`.
    pub maps: Vec<CMatrix>,
}

impl ZGradedComplex {
    pub fn new(dims: Vec<usize>, maps: Vec<CMatrix>) -> Result<Self> {
        if maps.len() + 1 != dims.len() {
            return Err(Error::Shape(format!(
                "{} maps for {} degrees",
                maps.len(),
                dims.len()
            )));
        }
        for (q, m) in maps.iter().enumerate() {
            if m.shape() != (dims[q + 1], dims[q]) {
                return Err(Error::Shape(format!(
                    "map out of degree {q} has the wrong shape"
                )));
            }
        }
        Ok(Self { dims, maps })
    }

    /// Sums even and odd degrees; blocks appear in increasing degree.
    pub fn collapse(&self) -> OddOp {
        let offsets = |parity: usize| -> Vec<Option<usize>> {
            let mut off = 0;
            self.dims
                .iter()
                .enumerate()
                .map(|(q, &d)| {
                    if q % 2 == parity {
                        let o = off;
                        off += d;
                        Some(o)
                    } else {
                        None
                    }
                })
                .collect()
        };
        let even_off = offsets(0);
        let odd_off = offsets(1);
        let n0: usize = self.dims.iter().step_by(2).sum();
        let n1: usize = self.dims.iter().skip(1).step_by(2).sum();
        let mut op = OddOp::zeros(n0, n1);
        for (q, m) in self.maps.iter().enumerate() {
            if q % 2 == 0 {
                op.eo
                    .set_block(odd_off[q + 1].unwrap(), even_off[q].unwrap(), m);
            } else {
                op.oe
                    .set_block(even_off[q + 1].unwrap(), odd_off[q].unwrap(), m);
            }
        }
        op
    }
}

/// `d + h`, after checking `h^2 = 0` and `d h + h d = 0` to
/// `tol * max(|d| |h|, |h|^2, 1)`.
pub fn flux_twist(d: &OddOp, h: &FluxOperator, tol: f64) -> Result<OddOp> {
    if d.dims() != h.h.dims() {
        return Err(Error::Shape(format!(
            "flux acts on {:?}, differential on {:?}",
            h.h.dims(),
            d.dims()
        )));
    }
    let df = d.to_full();
    let hf = h.h.to_full();
    let scale = (df.frobenius_norm() * hf.frobenius_norm())
        .max(hf.frobenius_norm().powi(2))
        .max(1.0);
    let bound = tol * scale;
    let square = hf.matmul(&hf).frobenius_norm();
    if square > bound {
        return Err(Error::Closedness {
            residual: square,
            bound,
        });
    }
    let anti = (&df.matmul(&hf) + &hf.matmul(&df)).frobenius_norm();
    if anti > bound {
        return Err(Error::Closedness {
            residual: anti,
            bound,
        });
    }
    Ok(d.add(&h.h))
}

/// `Gamma D Gamma`, after checking `Gamma^2 = I`.
pub fn sharp_conjugate(gamma: &CMatrix, op: &CMatrix) -> Result<CMatrix> {
    let n = gamma.rows();
    let residual = gamma.matmul(gamma).distance(&CMatrix::identity(n));
    if residual > 1e-10 * (n as f64).max(1.0) {
        return Err(Error::Involution { residual });
    }
    Ok(gamma.matmul(op).matmul(gamma))
}

/// `exp(B ^ .)` for an even form `B`.
pub fn eps_b(model: &WedgeModel, b: &Form) -> Result<CMatrix> {
    if let Some(d) = b.degrees().into_iter().find(|d| d % 2 == 1) {
        return Err(Error::Parity(format!(
            "B has a component of odd degree {d}"
        )));
    }
    Ok(expm(&model.wedge_matrix(b)?)?)
}

/// The flat torus model: constant forms on `T^m`, `d = H ^ .` collapsed to
/// Z2 and `d* = Gamma d Gamma` with `Gamma` the chirality of the metric.
#[derive(Debug, Clone)]
pub struct TorusModel {
    pub model: WedgeModel,
    pub metric: CMatrix,
    pub orientation: i8,
    pub flux: Form,
    pub gamma: CMatrix,
    pub complex: BiComplex,
}

pub fn torus_model(m: usize, g: &CMatrix, flux: &Form, orientation: i8) -> Result<TorusModel> {
    let model = WedgeModel::new(m)?;
    let gamma = chirality(m, g, orientation)?;
    let h = FluxOperator::from_form(&model, flux)?;
    let d = flux_twist(&OddOp::zeros(model.n_even, model.n_even), &h, 1e-11)?;
    let ds_full = sharp_conjugate(&gamma, &d.to_full())?;
    let ds = OddOp::from_full(&ds_full, model.n_even);
    let complex = BiComplex::from_ops(d, ds)?;
    Ok(TorusModel {
        model,
        metric: g.clone(),
        orientation,
        flux: flux.clone(),
        gamma,
        complex,
    })
}

/// A bi-complex standing for one `(p, .)` column of twisted Dolbeault data.
#[derive(Debug, Clone)]
pub struct DolbeaultComplex {
    pub p: usize,
    pub complex: BiComplex,
}

pub fn dolbeault_wrap(
    p: usize,
    dbar: OddOp,
    dbar_star: OddOp,
    validation_tol: f64,
) -> Result<DolbeaultComplex> {
    let complex = BiComplex::from_ops(dbar, dbar_star)?;
    require_valid(&complex, validation_tol)?;
    Ok(DolbeaultComplex { p, complex })
}

/// How the random generator lays out the spectrum of the Laplacian.
#[derive(Debug, Clone, PartialEq)]
pub enum SpectralProfile {
    /// `d` and `d*` share a random similarity; the Laplacian is diagonalizable
    /// with eigenvalues `|mu|` log-uniform in `[lo, hi]`, `|arg mu| <=
    /// max_phase`. `d_only` pairs carry `d` alone (kept out of `H(d)`),
    /// `dstar_only` pairs carry `d*` alone (counted in `H(d)`).
    Banded {
        lo: f64,
        hi: f64,
        max_phase: f64,
        d_only: usize,
        dstar_only: usize,
    },
    /// `d` and `d*` are conjugated rank normal forms with independent random
    /// similarities; the Laplacian is generic and non-normal.
    Independent,
}

impl Default for SpectralProfile {
    fn default() -> Self {
        SpectralProfile::Banded {
            lo: 0.2,
            hi: 20.0,
            max_phase: 1.0,
            d_only: 0,
            dstar_only: 0,
        }
    }
}

fn uniform_c(rng: &mut ChaCha8Rng) -> C64 {
    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| uniform_c(rng))
}

/// Well-conditioned random matrix `I + 0.5 G / sqrt(n)`.
fn random_similarity(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = random_matrix(rng, n, n);
    &CMatrix::identity(n) + &g.scale_real(0.5 / (n.max(1) as f64).sqrt())
}

fn random_even_similarity(rng: &mut ChaCha8Rng, n0: usize, n1: usize) -> Result<(EvenOp, EvenOp)> {
    let s = EvenOp {
        even: random_similarity(rng, n0),
        odd: random_similarity(rng, n1),
    };
    let sinv = EvenOp {
        even: inverse(&s.even)?,
        odd: inverse(&s.odd)?,
    };
    Ok((s, sinv))
}

/// Random even operator with entries uniform in the unit square times `scale`.
pub fn random_even(n0: usize, n1: usize, scale: f64, seed: u64) -> EvenOp {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    EvenOp {
        even: random_matrix(&mut rng, n0, n0).scale_real(scale),
        odd: random_matrix(&mut rng, n1, n1).scale_real(scale),
    }
}

#[derive(Clone, Copy)]
enum PairKind {
    Both(C64, C64),
    DOnly(C64),
    DStarOnly(C64),
}

/// Seeded random bi-complex with prescribed dimensions and `H(d)` Betti
/// numbers.
pub fn random_bicomplex(
    dims: (usize, usize),
    betti: (usize, usize),
    profile: &SpectralProfile,
    seed: u64,
) -> Result<BiComplex> {
    let (n0, n1) = dims;
    let (h0, h1) = betti;
    if h0 > n0 || h1 > n1 || n0 as i64 - n1 as i64 != h0 as i64 - h1 as i64 {
        return Err(Error::Infeasible(format!(
            "Betti numbers ({h0},{h1}) incompatible with dimensions ({n0},{n1}): need h0 <= n0, h1 <= n1, n0 - n1 = h0 - h1"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kinds = Vec::new();
    let (harm0, harm1);
    match *profile {
        SpectralProfile::Banded {
            lo,
            hi,
            max_phase,
            d_only,
            dstar_only,
        } => {
            if !(lo > 0.0 && hi >= lo && max_phase >= 0.0) {
                return Err(Error::Infeasible(format!(
                    "banded profile needs 0 < lo <= hi and max_phase >= 0, got [{lo}, {hi}], {max_phase}"
                )));
            }
            if dstar_only > h0 || dstar_only > h1 {
                return Err(Error::Infeasible(format!(
                    "{dstar_only} d*-only pairs exceed the requested Betti numbers ({h0},{h1})"
                )));
            }
            if d_only > n0 - h0 {
                return Err(Error::Infeasible(format!(
                    "{d_only} d-only pairs exceed the {} available pairs",
                    n0 - h0
                )));
            }
            harm0 = h0 - dstar_only;
            harm1 = h1 - dstar_only;
            let both = n0 - h0 - d_only;
            let unit_phase = |rng: &mut ChaCha8Rng| {
                let t: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                c64(t.cos(), t.sin())
            };
            for _ in 0..both {
                let r = (lo.ln() + (hi.ln() - lo.ln()) * rng.gen_range(0.0..1.0)).exp();
                let phase = if max_phase > 0.0 {
                    rng.gen_range(-max_phase..=max_phase)
                } else {
                    0.0
                };
                let mu = C64::from_polar(r, phase);
                let a = unit_phase(&mut rng) * r.sqrt();
                kinds.push(PairKind::Both(a, mu / a));
            }
            for _ in 0..d_only {
                kinds.push(PairKind::DOnly(unit_phase(&mut rng)));
            }
            for _ in 0..dstar_only {
                kinds.push(PairKind::DStarOnly(unit_phase(&mut rng)));
            }
        }
        SpectralProfile::Independent => {
            harm0 = h0;
            harm1 = h1;
            for _ in 0..(n0 - h0) {
                kinds.push(PairKind::Both(ONE, ONE));
            }
        }
    }

    let pairs = kinds.len();
    let mut d = OddOp::zeros(n0, n1);
    let mut ds = OddOp::zeros(n0, n1);
    for (p, kind) in kinds.iter().enumerate() {
        let forward: bool = rng.gen_bool(0.5);
        let (a, b) = match *kind {
            PairKind::Both(a, b) => (a, b),
            PairKind::DOnly(a) => (a, ZERO),
            PairKind::DStarOnly(b) => (ZERO, b),
        };
        // pair p couples even vector p with odd vector p
        if forward {
            d.eo[(p, p)] = a;
            ds.oe[(p, p)] = b;
        } else {
            d.oe[(p, p)] = a;
            ds.eo[(p, p)] = b;
        }
    }
    debug_assert_eq!(pairs + harm0, n0);
    debug_assert_eq!(pairs + harm1, n1);

    let (s, sinv) = random_even_similarity(&mut rng, n0, n1)?;
    let d = d.sandwich(&s, &sinv);
    let ds = match profile {
        SpectralProfile::Banded { .. } => ds.sandwich(&s, &sinv),
        SpectralProfile::Independent => {
            let (s2, s2inv) = random_even_similarity(&mut rng, n0, n1)?;
            ds.sandwich(&s2, &s2inv)
        }
    };
    BiComplex::from_ops(d, ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bicomplex::{cohomology, validate};

    #[test]
    fn form_round_trip() {
        let f: Form = "123:2,145:0.5".parse().unwrap();
        assert_eq!(f.degrees(), vec![3, 3]);
        assert_eq!(f.to_string(), "123:2,145:0.5");
        assert!("12x:1".parse::<Form>().is_err());
        assert!("113:1".parse::<Form>().is_err());
    }

    #[test]
    fn basis_order_even_then_odd() {
        let w = WedgeModel::new(3).unwrap();
        let labels: Vec<String> = (0..8).map(|i| w.label(i)).collect();
        assert_eq!(labels, ["1", "e12", "e13", "e23", "e1", "e2", "e3", "e123"]);
    }

    #[test]
    fn chirality_m3_values() {
        let g = CMatrix::identity(3);
        let gamma = chirality(3, &g, 1).unwrap();
        let w = WedgeModel::new(3).unwrap();
        let one = w.position(0);
        let top = w.position(0b111);
        assert!((gamma[(top, one)] - c64(-1.0, 0.0)).norm() < 1e-15);
        assert!((gamma[(one, top)] - c64(-1.0, 0.0)).norm() < 1e-15);
        assert!(gamma.matmul(&gamma).distance(&CMatrix::identity(8)) < 1e-14);
    }

    #[test]
    fn chirality_involution_low_m() {
        for m in 1..=6 {
            let g = CMatrix::from_fn(m, m, |i, j| {
                if i == j {
                    c64(1.5 + i as f64 * 0.3, 0.0)
                } else {
                    c64(0.1 / (1.0 + (i + j) as f64), 0.0)
                }
            });
            let gamma = chirality(m, &g, 1).unwrap();
            let n = 1 << m;
            assert!(
                gamma.matmul(&gamma).distance(&CMatrix::identity(n)) < 1e-12,
                "m = {m}"
            );
        }
    }

    #[test]
    fn rejects_bad_metric() {
        let g = CMatrix::diag_real(&[1.0, -1.0]);
        assert!(matches!(chirality(2, &g, 1), Err(Error::Metric(_))));
    }

    #[test]
    fn torus_m3_betti() {
        let g = CMatrix::identity(3);
        let t = torus_model(3, &g, &Form::monomial(&[1, 2, 3], 2.0), 1).unwrap();
        assert_eq!((t.complex.n0, t.complex.n1), (4, 4));
        assert!(validate(&t.complex, 1e-10).pass);
        assert_eq!(cohomology(&t.complex, 1e-9).betti(), (3, 3));
        let t0 = torus_model(3, &g, &Form::monomial(&[1, 2, 3], 0.0), 1).unwrap();
        assert_eq!(cohomology(&t0.complex, 1e-9).betti(), (4, 4));
    }

    #[test]
    fn torus_flux_degree_checks() {
        let g = CMatrix::identity(3);
        for bad in ["12:1.0", "1:1.0"] {
            let f: Form = bad.parse().unwrap();
            assert!(matches!(
                torus_model(3, &g, &f, 1),
                Err(Error::FluxDegree(_))
            ));
        }
        let g5 = CMatrix::identity(5);
        let t = torus_model(5, &g5, &Form::monomial(&[1, 2, 3], 1.0), 1).unwrap();
        assert!(validate(&t.complex, 1e-10).pass);
    }

    #[test]
    fn flux_twist_checks() {
        let d = OddOp::zeros(2, 2);
        let zero = FluxOperator::from_matrix(OddOp::zeros(2, 2), "zero");
        assert_eq!(flux_twist(&d, &zero, 1e-11).unwrap(), d);
        let mut base = OddOp::zeros(1, 1);
        base.eo[(0, 0)] = ONE;
        let mut h = OddOp::zeros(1, 1);
        h.oe[(0, 0)] = ONE;
        let r = flux_twist(&base, &FluxOperator::from_matrix(h, "bad"), 1e-11);
        assert!(matches!(r, Err(Error::Closedness { .. })));
    }

    #[test]
    fn sharp_conjugate_checks() {
        let d = CMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert_eq!(sharp_conjugate(&CMatrix::identity(2), &d).unwrap(), d);
        let z = sharp_conjugate(&CMatrix::identity(2), &CMatrix::zeros(2, 2)).unwrap();
        assert_eq!(z.max_abs(), 0.0);
        let bad = CMatrix::diag_real(&[2.0, 1.0]);
        assert!(matches!(
            sharp_conjugate(&bad, &d),
            Err(Error::Involution { .. })
        ));
    }

    #[test]
    fn eps_b_properties() {
        let w = WedgeModel::new(3).unwrap();
        assert!(
            eps_b(&w, &Form::zero())
                .unwrap()
                .distance(&CMatrix::identity(8))
                < 1e-15
        );
        let b = Form::monomial(&[1, 2], 0.7);
        let e = eps_b(&w, &b).unwrap();
        let einv = eps_b(&w, &b.scale(-1.0)).unwrap();
        assert!(e.matmul(&einv).distance(&CMatrix::identity(8)) < 1e-14);
        let h = w.wedge_matrix(&Form::monomial(&[1, 2, 3], 2.0)).unwrap();
        assert!(e.commutator(&h).max_abs() < 1e-15);
        assert!(matches!(
            eps_b(&w, &Form::monomial(&[1], 1.0)),
            Err(Error::Parity(_))
        ));
    }

    #[test]
    fn collapse_two_step_complex() {
        let z = ZGradedComplex::new(
            vec![1, 2, 1],
            vec![
                CMatrix::from_real_rows(&[&[1.0], &[0.0]]),
                CMatrix::from_real_rows(&[&[0.0, 1.0]]),
            ],
        )
        .unwrap();
        let op = z.collapse();
        assert_eq!(op.dims(), (2, 2));
        let (a, b) = op.square();
        assert_eq!(a.max_abs() + b.max_abs(), 0.0);
    }

    #[test]
    fn random_generator_contract() {
        let c = random_bicomplex((1, 1), (0, 0), &SpectralProfile::default(), 7).unwrap();
        assert!(validate(&c, 1e-10).pass);
        assert_eq!(cohomology(&c, 1e-9).betti(), (0, 0));
        let c = random_bicomplex((3, 0), (3, 0), &SpectralProfile::Independent, 1).unwrap();
        assert_eq!(c.d.norm() + c.ds.norm(), 0.0);
        let a = random_bicomplex((4, 4), (1, 1), &SpectralProfile::Independent, 9).unwrap();
        let b = random_bicomplex((4, 4), (1, 1), &SpectralProfile::Independent, 9).unwrap();
        assert_eq!(a, b);
        assert_eq!(cohomology(&a, 1e-9).betti(), (1, 1));
        assert!(matches!(
            random_bicomplex((2, 2), (1, 0), &SpectralProfile::Independent, 0),
            Err(Error::Infeasible(_))
        ));
    }

    #[test]
    fn dolbeault_wrap_checks() {
        let t = torus_model(
            3,
            &CMatrix::identity(3),
            &Form::monomial(&[1, 2, 3], 2.0),
            1,
        )
        .unwrap();
        let w = dolbeault_wrap(0, t.complex.d.clone(), t.complex.ds.clone(), 1e-10).unwrap();
        assert_eq!(w.complex, t.complex);
        let bad = OddOp {
            eo: CMatrix::zeros(2, 3),
            oe: CMatrix::zeros(3, 2),
        };
        assert!(matches!(
            dolbeault_wrap(0, bad, OddOp::zeros(2, 2), 1e-10),
            Err(Error::Shape(_))
        ));
    }
}
