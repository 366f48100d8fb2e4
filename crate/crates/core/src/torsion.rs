//! The torsion of a bi-complex: canonical maps for `d` and `d*`, the sign
//! exponent, the definitional, acyclic and spectrally truncated paths, and
//! finite-dimensional Agmon-angle determinants.

use std::f64::consts::PI;

use crate::bicomplex::{
    cut_threshold, laplacian, operator_scale, rank_with_floor, spectral_truncate, BiComplex, Cut,
    EvenOp, OddOp, SpectralSplit, SplitData, SplitSide,
};
use crate::config::Tolerances;
use crate::detline::GradedDet;
use crate::error::{Error, Result};
use crate::numkit::{det, rank_basis, schur, CMatrix, Lu, C64, ONE};

pub const CANONICAL_BASIS: &str = "canonical";

/// Declared bases of `H(d)` and `H(d*)`, as cocycle/cycle representatives in
/// the coordinates of the complex.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceBases {
    pub coh: [CMatrix; 2],
    pub hom: [CMatrix; 2],
    pub coh_id: String,
    pub hom_id: String,
}

impl ReferenceBases {
    /// The orthonormal harmonic-complement lifts chosen by the splitting.
    pub fn canonical(split: &SplitData) -> Self {
        Self {
            coh: split.coh.h.clone(),
            hom: split.hom.h.clone(),
            coh_id: CANONICAL_BASIS.to_string(),
            hom_id: CANONICAL_BASIS.to_string(),
        }
    }

    pub fn for_complex(c: &BiComplex, rank_tol: f64) -> Self {
        Self::canonical(&SplitData::new(c, rank_tol))
    }

    /// Pushes the representatives forward: cohomology by `x`, homology by `y`.
    pub fn transport(&self, x: &EvenOp, y: &EvenOp) -> Self {
        Self {
            coh: [x.apply(0, &self.coh[0]), x.apply(1, &self.coh[1])],
            hom: [y.apply(0, &self.hom[0]), y.apply(1, &self.hom[1])],
            coh_id: self.coh_id.clone(),
            hom_id: self.hom_id.clone(),
        }
    }

    /// Applies left factors `l[k]` (maps into new coordinates) to every basis.
    fn map_rows(&self, l: [&CMatrix; 2]) -> Self {
        Self {
            coh: [l[0].matmul(&self.coh[0]), l[1].matmul(&self.coh[1])],
            hom: [l[0].matmul(&self.hom[0]), l[1].matmul(&self.hom[1])],
            coh_id: self.coh_id.clone(),
            hom_id: self.hom_id.clone(),
        }
    }
}

fn check_side(
    op: &OddOp,
    side: &SplitSide,
    basis: &[CMatrix; 2],
    what: &str,
    rank_tol: f64,
) -> Result<()> {
    for k in 0..2 {
        let z = &basis[k];
        let expect = side.h[k].cols();
        if z.cols() != expect || z.rows() != side.h[k].rows() {
            return Err(Error::Basis(format!(
                "{what} basis in parity {k} has shape {}x{}, expected {}x{expect}",
                z.rows(),
                z.cols(),
                side.h[k].rows()
            )));
        }
        if expect == 0 {
            continue;
        }
        let image = op.out_of(k).matmul(z);
        let bound = 1e-8 * op.out_of(k).frobenius_norm().max(1.0) * z.frobenius_norm().max(1.0);
        if image.frobenius_norm() > bound {
            return Err(Error::Basis(format!(
                "{what} representatives in parity {k} are not closed (residual {:.3e})",
                image.frobenius_norm()
            )));
        }
        let n = z.rows();
        let with_b = CMatrix::hstack(n, &[&side.b[k], z]);
        if rank_basis(&with_b, rank_tol).rank != side.b[k].cols() + expect {
            return Err(Error::Basis(format!(
                "{what} representatives in parity {k} are dependent modulo the image"
            )));
        }
    }
    Ok(())
}

/// Checks that declared bases are closed, of the right size and independent
/// modulo exact elements.
pub fn validate_bases(c: &BiComplex, bases: &ReferenceBases, rank_tol: f64) -> Result<()> {
    let split = SplitData::new(c, rank_tol);
    check_side(&c.d, &split.coh, &bases.coh, "cohomology", rank_tol)?;
    check_side(&c.ds, &split.hom, &bases.hom, "homology", rank_tol)
}

/// Solves `c_k = mu(op(x_{k-1}) (x) h_k (x) x_k)` for the (co)homology element
/// and returns `h_0 (x) h_1^{-1}` against the declared representatives.
/// `gamma[k]` is the coordinate of `c_k` against the standard wedge.
fn canonical_map(
    side: &SplitSide,
    reps: &[CMatrix; 2],
    gamma: [C64; 2],
    dims: (usize, usize),
    basis_id: &str,
) -> Result<GradedDet> {
    let mut eta = [ONE; 2];
    for k in 0..2 {
        let n = if k == 0 { dims.0 } else { dims.1 };
        let m = CMatrix::hstack(n, &[&side.b[k], &reps[k], &side.a[k]]);
        if m.cols() != n {
            return Err(Error::Split(format!(
                "parity {k}: {} + {} + {} columns do not fill dimension {n}",
                side.b[k].cols(),
                reps[k].cols(),
                side.a[k].cols()
            )));
        }
        if n == 0 {
            eta[k] = gamma[k];
            continue;
        }
        let lu = Lu::new(&m)?;
        if lu.rcond_estimate() <= 1e-13 {
            return Err(Error::Split(format!(
                "parity {k}: B + H + A is singular (rcond {:.3e})",
                lu.rcond_estimate()
            )));
        }
        eta[k] = gamma[k] / lu.det();
    }
    Ok(GradedDet {
        dims: (reps[0].cols(), reps[1].cols()),
        basis_id: basis_id.to_string(),
        coord: eta[0] / eta[1],
    })
}

/// The canonical map for `d`, evaluated at `c = c_0 (x) c_1^{-1}`.
pub fn phi(
    c: &BiComplex,
    split: &SplitData,
    bases: &ReferenceBases,
    c_coords: [C64; 2],
) -> Result<GradedDet> {
    canonical_map(
        &split.coh,
        &bases.coh,
        c_coords,
        (c.n0, c.n1),
        &bases.coh_id,
    )
}

/// The canonical map for `d*`.
pub fn phi_prime(
    c: &BiComplex,
    split: &SplitData,
    bases: &ReferenceBases,
    c_coords: [C64; 2],
) -> Result<GradedDet> {
    canonical_map(
        &split.hom,
        &bases.hom,
        c_coords,
        (c.n0, c.n1),
        &bases.hom_id,
    )
}

/// Dimensions entering the sign exponent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SignDims {
    /// `dim B^k`, image of `d` in parity `k`.
    pub b_up: [usize; 2],
    /// `dim B_k`, image of `d*` in parity `k`.
    pub b_down: [usize; 2],
    /// `dim H^k(d)`.
    pub h_up: [usize; 2],
    /// `dim H_k(d*)`.
    pub h_down: [usize; 2],
}

impl SignDims {
    pub fn from_split(split: &SplitData) -> Self {
        let (b0, b1) = split.coh.image_dims();
        let (bb0, bb1) = split.hom.image_dims();
        let (h0, h1) = split.coh.betti();
        let (hh0, hh1) = split.hom.betti();
        Self {
            b_up: [b0, b1],
            b_down: [bb0, bb1],
            h_up: [h0, h1],
            h_down: [hh0, hh1],
        }
    }
}

/// `S = sum_k [ dim B_{k-1} dim B^{k+1} + dim B^{k+1} dim H_k + dim B_{k-1} dim H^k ]`
/// with parities taken mod 2; returned mod 2.
pub fn sign_s(dims: &SignDims) -> u8 {
    let mut s = 0usize;
    for k in 0..2 {
        let prev = (k + 1) % 2;
        let next = (k + 1) % 2;
        s += dims.b_down[prev] * dims.b_up[next]
            + dims.b_up[next] * dims.h_down[k]
            + dims.b_down[prev] * dims.h_up[k];
    }
    (s % 2) as u8
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorsionValue {
    pub coord: C64,
    pub coh_basis_id: String,
    pub hom_basis_id: String,
    /// `None` for the definitional path (no truncation).
    pub lambda_used: Option<f64>,
    /// Graded determinant of `d* d` on the `(lambda, inf)` part.
    pub tail_factor: C64,
    /// Definitional torsion of the `[0, lambda]` part.
    pub low_coord: C64,
    pub low_dims: (usize, usize),
}

impl TorsionValue {
    pub fn log_magnitude(&self) -> f64 {
        self.coord.norm().ln()
    }

    pub fn phase(&self) -> f64 {
        self.coord.arg()
    }

    /// Ratio `self / other`, refusing values in different trivializations.
    pub fn compare(&self, other: &TorsionValue) -> Result<C64> {
        if self.coh_basis_id != other.coh_basis_id || self.hom_basis_id != other.hom_basis_id {
            return Err(Error::BasisMismatch {
                left: format!("{}|{}", self.coh_basis_id, self.hom_basis_id),
                right: format!("{}|{}", other.coh_basis_id, other.hom_basis_id),
            });
        }
        Ok(self.coord / other.coord)
    }

    /// New coordinate after replacing the cohomology bases; `t[k]` expresses
    /// the old representatives in the new ones (old = new * t).
    pub fn rebase_cohomology(&self, t: [&CMatrix; 2], new_id: &str) -> Result<Self> {
        let f = det(t[0])? / det(t[1])?;
        Ok(Self {
            coord: self.coord * f,
            low_coord: self.low_coord * f,
            coh_basis_id: new_id.to_string(),
            ..self.clone()
        })
    }

    /// As [`rebase_cohomology`](Self::rebase_cohomology) for the homology side,
    /// which enters inversely.
    pub fn rebase_homology(&self, t: [&CMatrix; 2], new_id: &str) -> Result<Self> {
        let f = det(t[1])? / det(t[0])?;
        Ok(Self {
            coord: self.coord * f,
            low_coord: self.low_coord * f,
            hom_basis_id: new_id.to_string(),
            ..self.clone()
        })
    }
}

/// `(-1)^S phi(c) / phi'(c)` against declared bases (canonical ones if `None`).
pub fn torsion_definition(
    c: &BiComplex,
    bases: Option<&ReferenceBases>,
    tol: &Tolerances,
) -> Result<TorsionValue> {
    let split = SplitData::new(c, tol.rank_tol);
    let canonical;
    let bases = match bases {
        Some(b) => b,
        None => {
            canonical = ReferenceBases::canonical(&split);
            &canonical
        }
    };
    torsion_with_split(c, &split, bases, [ONE, ONE])
}

/// Definitional path with an explicit splitting and choice of `c`.
pub fn torsion_with_split(
    c: &BiComplex,
    split: &SplitData,
    bases: &ReferenceBases,
    c_coords: [C64; 2],
) -> Result<TorsionValue> {
    let f = phi(c, split, bases, c_coords)?;
    let fp = phi_prime(c, split, bases, c_coords)?;
    let sign = if sign_s(&SignDims::from_split(split)) == 0 {
        1.0
    } else {
        -1.0
    };
    let coord = f.coord / fp.coord * sign;
    Ok(TorsionValue {
        coord,
        coh_basis_id: bases.coh_id.clone(),
        hom_basis_id: bases.hom_id.clone(),
        lambda_used: None,
        tail_factor: ONE,
        low_coord: coord,
        low_dims: (c.n0, c.n1),
    })
}

/// Determinant of `d* d` restricted to `Ker d*` in parity `k`, computed in an
/// orthonormal basis of that subspace.
fn plus_determinant(
    c: &BiComplex,
    k: usize,
    theta: Option<f64>,
    floor: f64,
    tol: &Tolerances,
) -> Result<C64> {
    let kernel = rank_with_floor(c.ds.out_of(k), tol.rank_tol, floor).null_basis;
    let m = c.ds.out_of(k + 1).matmul(c.d.out_of(k));
    let r = kernel.adjoint().matmul(&m).matmul(&kernel);
    match theta {
        Some(t) => Ok(agmon_log_det(&r, t, tol.cluster_tol)?.exp()),
        None => Ok(det(&r)?),
    }
}

/// `Det(d*d | C_+^0) / Det(d*d | C_+^1)` for a complex with invertible Laplacian.
pub fn torsion_acyclic(c: &BiComplex, tol: &Tolerances) -> Result<C64> {
    let lap = laplacian(c);
    let delta = cut_threshold(&lap, tol.cluster_tol);
    for k in 0..2 {
        let ev = schur(lap.block(k))?.eigenvalues();
        if let Some(&z) = ev.iter().find(|z| z.norm() <= delta) {
            return Err(Error::NotAcyclic { eigenvalue: z });
        }
    }
    let floor = operator_scale(c);
    Ok(plus_determinant(c, 0, None, floor, tol)? / plus_determinant(c, 1, None, floor, tol)?)
}

/// `prod_k Det(d*d | C_+^k on (lambda, inf))^{(-1)^k}`.
pub fn tail_factor(
    split: &SpectralSplit,
    c: &BiComplex,
    theta: Option<f64>,
    tol: &Tolerances,
) -> Result<C64> {
    let high = split.high_complex(c);
    if high.n0 + high.n1 == 0 {
        return Ok(ONE);
    }
    let floor = operator_scale(c);
    Ok(plus_determinant(&high, 0, theta, floor, tol)?
        / plus_determinant(&high, 1, theta, floor, tol)?)
}

/// Assembles the torsion from the definitional torsion of `C_[0,lambda]` and
/// the determinant factor of `C_(lambda,inf)`. The declared bases of the full
/// complex are carried to the truncation by the spectral projection.
pub fn torsion_truncated(
    c: &BiComplex,
    cut: Cut,
    bases: Option<&ReferenceBases>,
    theta: Option<f64>,
    tol: &Tolerances,
) -> Result<TorsionValue> {
    let canonical;
    let bases = match bases {
        Some(b) => b,
        None => {
            canonical = ReferenceBases::for_complex(c, tol.rank_tol);
            &canonical
        }
    };
    let split = spectral_truncate(c, cut, tol)?;
    truncated_with_split(c, &split, bases, theta, tol)
}

pub fn truncated_with_split(
    c: &BiComplex,
    split: &SpectralSplit,
    bases: &ReferenceBases,
    theta: Option<f64>,
    tol: &Tolerances,
) -> Result<TorsionValue> {
    let low = split.low_complex(c);
    let low_bases = bases.map_rows([&split.parts[0].low_rows, &split.parts[1].low_rows]);
    let low_split = SplitData::with_floor(&low, tol.rank_tol, operator_scale(c));
    let low_tau = torsion_with_split(&low, &low_split, &low_bases, [ONE, ONE])?;
    let tail = tail_factor(split, c, theta, tol)?;
    let lambda_used = split.cut.value();
    Ok(TorsionValue {
        coord: tail * low_tau.coord,
        coh_basis_id: bases.coh_id.clone(),
        hom_basis_id: bases.hom_id.clone(),
        lambda_used,
        tail_factor: tail,
        low_coord: low_tau.coord,
        low_dims: (low.n0, low.n1),
    })
}

/// Wraps an angle into `(theta - 2 pi, theta]`.
fn branch_arg(z: C64, theta: f64) -> f64 {
    let mut a = z.arg();
    while a > theta {
        a -= 2.0 * PI;
    }
    while a <= theta - 2.0 * PI {
        a += 2.0 * PI;
    }
    a
}

/// `sum log mu` over nonzero eigenvalues with the branch cut along angle
/// `theta`. Eigenvalues below `zero_tol * max(|A|, 1)` count as zero.
pub fn agmon_log_det(a: &CMatrix, theta: f64, zero_tol: f64) -> Result<C64> {
    if !(theta > 0.0 && theta < 2.0 * PI) {
        return Err(Error::Contract(format!(
            "Agmon angle must lie in (0, 2pi), got {theta}"
        )));
    }
    let ev = schur(a)?.eigenvalues();
    let delta = zero_tol * a.frobenius_norm().max(1.0);
    let mut sum = C64::new(0.0, 0.0);
    for z in ev {
        let r = z.norm();
        if r <= delta {
            continue;
        }
        let arg = branch_arg(z, theta);
        let off = (theta - arg).min(arg - (theta - 2.0 * PI));
        let ray_distance = if off >= PI / 2.0 { r } else { r * off.sin() };
        if ray_distance <= delta {
            return Err(Error::AgmonCollision {
                theta,
                eigenvalue: z,
            });
        }
        sum += C64::new(r.ln(), arg);
    }
    Ok(sum)
}
