//! Z2-graded spaces carrying two odd square-zero differentials.

use serde::Serialize;

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::numkit::{expm, orthonormalize, rank_basis, split_spectrum, CMatrix, RankBasis, C64};

/// An odd operator, stored as its two off-diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct OddOp {
    /// `C^0 -> C^1`, shape `n1 x n0`.
    pub eo: CMatrix,
    /// `C^1 -> C^0`, shape `n0 x n1`.
    pub oe: CMatrix,
}

impl OddOp {
    pub fn zeros(n0: usize, n1: usize) -> Self {
        Self {
            eo: CMatrix::zeros(n1, n0),
            oe: CMatrix::zeros(n0, n1),
        }
    }

    /// Block leaving parity `k`.
    pub fn out_of(&self, k: usize) -> &CMatrix {
        if k % 2 == 0 {
            &self.eo
        } else {
            &self.oe
        }
    }

    /// Block arriving in parity `k`.
    pub fn into_parity(&self, k: usize) -> &CMatrix {
        self.out_of(k + 1)
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.eo.cols(), self.eo.rows())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            eo: self.eo.scale(s),
            oe: self.oe.scale(s),
        }
    }

    pub fn add(&self, other: &OddOp) -> Self {
        Self {
            eo: &self.eo + &other.eo,
            oe: &self.oe + &other.oe,
        }
    }

    /// The full `(n0+n1) x (n0+n1)` matrix in even-then-odd ordering.
    pub fn to_full(&self) -> CMatrix {
        let (n0, n1) = self.dims();
        let mut m = CMatrix::zeros(n0 + n1, n0 + n1);
        m.set_block(n0, 0, &self.eo);
        m.set_block(0, n0, &self.oe);
        m
    }

    pub fn from_full(m: &CMatrix, n0: usize) -> Self {
        let n = m.rows();
        Self {
            eo: m.block(n0, n, 0, n0),
            oe: m.block(0, n0, n0, n),
        }
    }

    /// Residual norms of `oe * eo` and `eo * oe`.
    pub fn square(&self) -> (CMatrix, CMatrix) {
        (self.oe.matmul(&self.eo), self.eo.matmul(&self.oe))
    }

    /// `x * self * y` for even operators `x`, `y`.
    pub fn sandwich(&self, x: &EvenOp, y: &EvenOp) -> Self {
        Self {
            eo: x.odd.matmul(&self.eo).matmul(&y.even),
            oe: x.even.matmul(&self.oe).matmul(&y.odd),
        }
    }

    pub fn norm(&self) -> f64 {
        (self.eo.frobenius_norm().powi(2) + self.oe.frobenius_norm().powi(2)).sqrt()
    }
}

/// An even operator, stored as its two diagonal blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct EvenOp {
    pub even: CMatrix,
    pub odd: CMatrix,
}

impl EvenOp {
    pub fn identity(n0: usize, n1: usize) -> Self {
        Self {
            even: CMatrix::identity(n0),
            odd: CMatrix::identity(n1),
        }
    }

    pub fn zeros(n0: usize, n1: usize) -> Self {
        Self {
            even: CMatrix::zeros(n0, n0),
            odd: CMatrix::zeros(n1, n1),
        }
    }

    pub fn block(&self, k: usize) -> &CMatrix {
        if k % 2 == 0 {
            &self.even
        } else {
            &self.odd
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.even.rows(), self.odd.rows())
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            even: self.even.scale(s),
            odd: self.odd.scale(s),
        }
    }

    pub fn matmul(&self, other: &EvenOp) -> Self {
        Self {
            even: self.even.matmul(&other.even),
            odd: self.odd.matmul(&other.odd),
        }
    }

    pub fn expm(&self) -> Result<Self> {
        Ok(Self {
            even: expm(&self.even)?,
            odd: expm(&self.odd)?,
        })
    }

    pub fn supertrace(&self) -> C64 {
        self.even.trace() - self.odd.trace()
    }

    pub fn to_full(&self) -> CMatrix {
        CMatrix::direct_sum(&self.even, &self.odd)
    }

    pub fn from_full(m: &CMatrix, n0: usize) -> Self {
        let n = m.rows();
        Self {
            even: m.block(0, n0, 0, n0),
            odd: m.block(n0, n, n0, n),
        }
    }

    pub fn apply(&self, k: usize, v: &CMatrix) -> CMatrix {
        self.block(k).matmul(v)
    }
}

/// A Z2-graded space `C^0 + C^1` with odd differentials `d` and `d*`, both
/// squaring to zero. The two are not assumed adjoint to each other.
#[derive(Debug, Clone, PartialEq)]
pub struct BiComplex {
    pub n0: usize,
    pub n1: usize,
    pub d: OddOp,
    pub ds: OddOp,
}

impl BiComplex {
    pub fn new(d_eo: CMatrix, d_oe: CMatrix, ds_eo: CMatrix, ds_oe: CMatrix) -> Result<Self> {
        let (n1, n0) = d_eo.shape();
        let expect = [
            ("d_eo", &d_eo, (n1, n0)),
            ("d_oe", &d_oe, (n0, n1)),
            ("ds_eo", &ds_eo, (n1, n0)),
            ("ds_oe", &ds_oe, (n0, n1)),
        ];
        for (name, m, shape) in expect {
            if m.shape() != shape {
                return Err(Error::Shape(format!(
                    "{name} is {}x{}, expected {}x{}",
                    m.rows(),
                    m.cols(),
                    shape.0,
                    shape.1
                )));
            }
            if !m.is_finite() {
                return Err(Error::Shape(format!("{name} has non-finite entries")));
            }
        }
        Ok(Self {
            n0,
            n1,
            d: OddOp { eo: d_eo, oe: d_oe },
            ds: OddOp {
                eo: ds_eo,
                oe: ds_oe,
            },
        })
    }

    pub fn from_ops(d: OddOp, ds: OddOp) -> Result<Self> {
        Self::new(d.eo, d.oe, ds.eo, ds.oe)
    }

    pub fn zero(n0: usize, n1: usize) -> Self {
        Self {
            n0,
            n1,
            d: OddOp::zeros(n0, n1),
            ds: OddOp::zeros(n0, n1),
        }
    }

    pub fn dim(&self, k: usize) -> usize {
        if k % 2 == 0 {
            self.n0
        } else {
            self.n1
        }
    }

    /// Orthogonal direct sum, even and odd parts concatenated separately.
    pub fn direct_sum(&self, other: &BiComplex) -> BiComplex {
        let sum = |a: &OddOp, b: &OddOp| OddOp {
            eo: CMatrix::direct_sum(&a.eo, &b.eo),
            oe: CMatrix::direct_sum(&a.oe, &b.oe),
        };
        BiComplex {
            n0: self.n0 + other.n0,
            n1: self.n1 + other.n1,
            d: sum(&self.d, &other.d),
            ds: sum(&self.ds, &other.ds),
        }
    }

    /// Applies the even change of coordinates `x` (new = x * old).
    pub fn conjugate(&self, x: &EvenOp, xinv: &EvenOp) -> BiComplex {
        BiComplex {
            n0: self.n0,
            n1: self.n1,
            d: self.d.sandwich(x, xinv),
            ds: self.ds.sandwich(x, xinv),
        }
    }

    pub fn scale(&self) -> f64 {
        self.d.norm().max(self.ds.norm()).max(1.0)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Residual {
    pub identity: &'static str,
    pub residual: f64,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub residuals: Vec<Residual>,
    pub pass: bool,
}

/// Checks the four square-zero identities. Each residual is measured against
/// `validation_tol * max(|A| |B|, 1)` for the product `A B` in question.
pub fn validate(c: &BiComplex, validation_tol: f64) -> ValidationReport {
    let mut residuals = Vec::with_capacity(4);
    let mut push = |identity: &'static str, a: &CMatrix, b: &CMatrix| {
        let residual = a.matmul(b).frobenius_norm();
        let bound = validation_tol * (a.frobenius_norm() * b.frobenius_norm()).max(1.0);
        residuals.push(Residual {
            identity,
            residual,
            bound,
            pass: residual <= bound,
        });
    };
    push("d_oe*d_eo", &c.d.oe, &c.d.eo);
    push("d_eo*d_oe", &c.d.eo, &c.d.oe);
    push("ds_oe*ds_eo", &c.ds.oe, &c.ds.eo);
    push("ds_eo*ds_oe", &c.ds.eo, &c.ds.oe);
    let pass = residuals.iter().all(|r| r.pass);
    ValidationReport { residuals, pass }
}

pub fn require_valid(c: &BiComplex, validation_tol: f64) -> Result<()> {
    let report = validate(c, validation_tol);
    if report.pass {
        Ok(())
    } else {
        let worst = report
            .residuals
            .iter()
            .filter(|r| !r.pass)
            .map(|r| {
                format!(
                    "{} residual {:.3e} > {:.3e}",
                    r.identity, r.residual, r.bound
                )
            })
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Invalid(worst))
    }
}

/// `Delta = d* d + d d*` as an even operator.
pub fn laplacian(c: &BiComplex) -> EvenOp {
    EvenOp {
        even: &c.ds.oe.matmul(&c.d.eo) + &c.d.oe.matmul(&c.ds.eo),
        odd: &c.ds.eo.matmul(&c.d.oe) + &c.d.eo.matmul(&c.ds.oe),
    }
}

/// `C^k = B^k + H^k + A^k` for one differential: `b[k]` spans the image
/// arriving in parity `k` (as `op * a[k-1]`), `h[k]` lifts the (co)homology
/// and `a[k]` is the orthogonal complement of the kernel.
#[derive(Debug, Clone)]
pub struct SplitSide {
    pub b: [CMatrix; 2],
    pub h: [CMatrix; 2],
    pub a: [CMatrix; 2],
    /// A singular value lies within a decade of the rank cutoff.
    pub ambiguous: bool,
}

impl SplitSide {
    pub fn betti(&self) -> (usize, usize) {
        (self.h[0].cols(), self.h[1].cols())
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.b[0].cols(), self.b[1].cols())
    }

    /// Checks the splitting invariants against the differential `op`.
    pub fn verify(&self, op: &OddOp, dims: (usize, usize), rank_tol: f64) -> Result<()> {
        for k in 0..2 {
            let n = if k == 0 { dims.0 } else { dims.1 };
            let all = CMatrix::hstack(n, &[&self.b[k], &self.h[k], &self.a[k]]);
            if all.cols() != n || rank_basis(&all, rank_tol).rank != n {
                return Err(Error::Split(format!(
                    "B + H + A does not span parity {k} ({} columns for dimension {n})",
                    all.cols()
                )));
            }
            let kernel = CMatrix::hstack(n, &[&self.b[k], &self.h[k]]);
            if op.out_of(k).matmul(&kernel).frobenius_norm()
                > 1e-8 * op.out_of(k).frobenius_norm().max(1.0) * kernel.frobenius_norm().max(1.0)
            {
                return Err(Error::Split(format!("B + H is not closed in parity {k}")));
            }
            let image = op.out_of(k).matmul(&self.a[k]);
            if self.a[k].cols() > 0 && rank_basis(&image, rank_tol).rank != self.a[k].cols() {
                return Err(Error::Split(format!(
                    "differential is not injective on A^{k}"
                )));
            }
        }
        Ok(())
    }
}

/// Orthogonal B/H/A splitting for the odd square-zero operator `op`.
pub fn split_side(op: &OddOp, dims: (usize, usize), rank_tol: f64, floor: f64) -> SplitSide {
    let ranks = [
        rank_with_floor(op.out_of(0), rank_tol, floor),
        rank_with_floor(op.out_of(1), rank_tol, floor),
    ];
    let a = [ranks[0].corange.clone(), ranks[1].corange.clone()];
    let mut ambiguous = ranks.iter().any(|r| r.ambiguous);
    let b = [
        op.into_parity(0).matmul(&a[1]),
        op.into_parity(1).matmul(&a[0]),
    ];
    let mut h: [CMatrix; 2] = [CMatrix::zeros(dims.0, 0), CMatrix::zeros(dims.1, 0)];
    for k in 0..2 {
        let n = if k == 0 { dims.0 } else { dims.1 };
        let kernel = &ranks[k].null_basis;
        let hdim = kernel.cols().saturating_sub(b[k].cols());
        let bo = orthonormalize(&b[k], rank_tol);
        let residual = kernel - &bo.matmul(&bo.adjoint().matmul(kernel));
        let rb = rank_basis(&residual, rank_tol);
        if rb.rank != hdim {
            ambiguous = true;
        }
        let cols = hdim.min(rb.col_basis.cols());
        let mut hk = rb.col_basis.columns(0, cols);
        if cols < hdim {
            // fall back to the leading left singular directions
            let full = crate::numkit::svd(&residual);
            hk = full.u.columns(0, hdim.min(full.u.cols()));
        }
        debug_assert_eq!(hk.rows(), n);
        h[k] = hk;
    }
    SplitSide { b, h, a, ambiguous }
}

/// Like `rank_basis`, but a block whose norm is at most `rank_tol * floor`
/// counts as zero. Restrictions of a complex to invariant subspaces can leave
/// blocks of pure rounding noise that are not small relative to themselves.
pub fn rank_with_floor(a: &CMatrix, rank_tol: f64, floor: f64) -> RankBasis {
    if a.frobenius_norm() <= rank_tol * floor {
        rank_basis(&CMatrix::zeros(a.rows(), a.cols()), rank_tol)
    } else {
        rank_basis(a, rank_tol)
    }
}

/// `max(|d|, |d*|)`, the reference size for rank decisions on a complex.
pub fn operator_scale(c: &BiComplex) -> f64 {
    c.d.norm().max(c.ds.norm())
}

/// Splitting for `d`.
pub fn cohomology(c: &BiComplex, rank_tol: f64) -> SplitSide {
    split_side(&c.d, (c.n0, c.n1), rank_tol, operator_scale(c))
}

/// Splitting for `d*`.
pub fn homology(c: &BiComplex, rank_tol: f64) -> SplitSide {
    split_side(&c.ds, (c.n0, c.n1), rank_tol, operator_scale(c))
}

#[derive(Debug, Clone)]
pub struct SplitData {
    pub coh: SplitSide,
    pub hom: SplitSide,
}

impl SplitData {
    pub fn new(c: &BiComplex, rank_tol: f64) -> Self {
        Self::with_floor(c, rank_tol, operator_scale(c))
    }

    /// Splitting of a complex cut out of a larger one of size `floor`.
    pub fn with_floor(c: &BiComplex, rank_tol: f64, floor: f64) -> Self {
        Self {
            coh: split_side(&c.d, (c.n0, c.n1), rank_tol, floor),
            hom: split_side(&c.ds, (c.n0, c.n1), rank_tol, floor),
        }
    }
}

/// The `[0, lambda]` / `(lambda, inf)` invariant splitting of one parity.
#[derive(Debug, Clone)]
pub struct PartSplit {
    pub low_basis: CMatrix,
    pub low_rows: CMatrix,
    pub high_basis: CMatrix,
    pub high_rows: CMatrix,
    pub low_eigenvalues: Vec<C64>,
    pub high_eigenvalues: Vec<C64>,
}

impl PartSplit {
    pub fn low_projector(&self) -> CMatrix {
        self.low_basis.matmul(&self.low_rows)
    }

    pub fn high_projector(&self) -> CMatrix {
        self.high_basis.matmul(&self.high_rows)
    }
}

/// Where to cut the Laplacian spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Cut {
    /// Keep generalized eigenvalues with `|mu| <= lambda`.
    At(f64),
    /// Keep everything: the truncation is the whole complex.
    Above,
}

impl Cut {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cut::At(l) => Some(*l),
            Cut::Above => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SpectralSplit {
    pub cut: Cut,
    /// Zero / collision threshold `cluster_tol * max(|Delta|, 1)`.
    pub delta: f64,
    pub parts: [PartSplit; 2],
    pub eigenvalues: [Vec<C64>; 2],
}

fn laplacian_norm(lap: &EvenOp) -> f64 {
    lap.even.frobenius_norm().max(lap.odd.frobenius_norm())
}

/// Spectral cut validity threshold for a complex.
pub fn cut_threshold(lap: &EvenOp, cluster_tol: f64) -> f64 {
    cluster_tol * laplacian_norm(lap).max(1.0)
}

pub fn spectral_truncate(c: &BiComplex, cut: Cut, tol: &Tolerances) -> Result<SpectralSplit> {
    if let Cut::At(l) = cut {
        if !(l.is_finite() && l >= 0.0) {
            return Err(Error::Contract(format!(
                "spectral cut must be finite and >= 0, got {l}"
            )));
        }
    }
    let lap = laplacian(c);
    let delta = cut_threshold(&lap, tol.cluster_tol);
    let keep = |z: C64| match cut {
        Cut::Above => true,
        Cut::At(l) if l <= 0.0 => z.norm() <= delta,
        Cut::At(l) => z.norm() <= l,
    };
    let mut parts = Vec::with_capacity(2);
    let mut eigenvalues = Vec::with_capacity(2);
    for k in 0..2 {
        let sp = split_spectrum(lap.block(k), keep)?;
        let all: Vec<C64> = sp
            .sel_eigenvalues
            .iter()
            .chain(&sp.rest_eigenvalues)
            .copied()
            .collect();
        if let Cut::At(l) = cut {
            if l > 0.0 {
                if let Some(&bad) = all
                    .iter()
                    .filter(|z| (z.norm() - l).abs() < delta)
                    .min_by(|a, b| (a.norm() - l).abs().total_cmp(&(b.norm() - l).abs()))
                {
                    return Err(Error::CutCollision {
                        lambda: l,
                        eigenvalue: bad,
                        parity: k,
                    });
                }
            }
        }
        parts.push(PartSplit {
            low_basis: sp.sel_basis,
            low_rows: sp.sel_rows,
            high_basis: sp.rest_basis,
            high_rows: sp.rest_rows,
            low_eigenvalues: sp.sel_eigenvalues,
            high_eigenvalues: sp.rest_eigenvalues,
        });
        eigenvalues.push(all);
    }
    let odd = parts.pop().unwrap();
    let even = parts.pop().unwrap();
    let odd_ev = eigenvalues.pop().unwrap();
    let even_ev = eigenvalues.pop().unwrap();
    Ok(SpectralSplit {
        cut,
        delta,
        parts: [even, odd],
        eigenvalues: [even_ev, odd_ev],
    })
}

impl SpectralSplit {
    fn restrict(&self, op: &OddOp, low: bool) -> OddOp {
        let pick = |k: usize| {
            let p = &self.parts[k];
            if low {
                (&p.low_basis, &p.low_rows)
            } else {
                (&p.high_basis, &p.high_rows)
            }
        };
        let (basis0, rows0) = pick(0);
        let (basis1, rows1) = pick(1);
        OddOp {
            eo: rows1.matmul(&op.eo).matmul(basis0),
            oe: rows0.matmul(&op.oe).matmul(basis1),
        }
    }

    /// `C_[0,lambda]` in the coordinates of its basis.
    pub fn low_complex(&self, c: &BiComplex) -> BiComplex {
        BiComplex {
            n0: self.parts[0].low_basis.cols(),
            n1: self.parts[1].low_basis.cols(),
            d: self.restrict(&c.d, true),
            ds: self.restrict(&c.ds, true),
        }
    }

    /// `C_(lambda,inf)` in the coordinates of its basis.
    pub fn high_complex(&self, c: &BiComplex) -> BiComplex {
        BiComplex {
            n0: self.parts[0].high_basis.cols(),
            n1: self.parts[1].high_basis.cols(),
            d: self.restrict(&c.d, false),
            ds: self.restrict(&c.ds, false),
        }
    }

    pub fn low_dims(&self) -> (usize, usize) {
        (
            self.parts[0].low_basis.cols(),
            self.parts[1].low_basis.cols(),
        )
    }

    pub fn high_dims(&self) -> (usize, usize) {
        (
            self.parts[0].high_basis.cols(),
            self.parts[1].high_basis.cols(),
        )
    }

    /// Largest commutator residual of the low projector with `d`, `d*`, `Delta`,
    /// relative to the operator scale.
    pub fn commutation_residual(&self, c: &BiComplex) -> f64 {
        let p = EvenOp {
            even: self.parts[0].low_projector(),
            odd: self.parts[1].low_projector(),
        };
        let mut worst: f64 = 0.0;
        for op in [&c.d, &c.ds] {
            let left = p.odd.matmul(&op.eo);
            let right = op.eo.matmul(&p.even);
            worst = worst.max((&left - &right).frobenius_norm());
            let left = p.even.matmul(&op.oe);
            let right = op.oe.matmul(&p.odd);
            worst = worst.max((&left - &right).frobenius_norm());
        }
        let lap = laplacian(c);
        for k in 0..2 {
            worst = worst.max(p.block(k).commutator(lap.block(k)).frobenius_norm());
        }
        worst / c.scale().powi(2)
    }
}

/// `C_+ = Ker d* ∩ C_(lambda,inf)` and `C_- = Ker d ∩ C_(lambda,inf)` in one
/// parity, as bases in the coordinates of the full complex.
#[derive(Debug, Clone)]
pub struct PlusMinus {
    pub plus: CMatrix,
    pub minus: CMatrix,
}

pub fn plus_minus_split(
    split: &SpectralSplit,
    c: &BiComplex,
    parity: usize,
    rank_tol: f64,
) -> Result<PlusMinus> {
    let k = parity % 2;
    let high = split.high_complex(c);
    let t = &split.parts[k].high_basis;
    let floor = operator_scale(c);
    let plus = t.matmul(&rank_with_floor(high.ds.out_of(k), rank_tol, floor).null_basis);
    let minus = t.matmul(&rank_with_floor(high.d.out_of(k), rank_tol, floor).null_basis);
    let dim = t.cols();
    if plus.cols() + minus.cols() != dim {
        return Err(Error::Degeneracy(format!(
            "dim C+ ({}) + dim C- ({}) != dim C_high ({dim}) in parity {k}",
            plus.cols(),
            minus.cols()
        )));
    }
    if dim > 0 {
        let both = CMatrix::hstack(t.rows(), &[&plus, &minus]);
        if rank_basis(&both, rank_tol).rank != dim {
            return Err(Error::Degeneracy(format!(
                "C+ and C- intersect in parity {k}"
            )));
        }
    }
    Ok(PlusMinus { plus, minus })
}
