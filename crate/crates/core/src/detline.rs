//! Determinant lines as scalars against declared reference bases.
//!
//! An element of `Det(V)` is stored as its coordinate relative to the wedge of
//! a named reference basis. Dual elements pair with direct ones by plain
//! multiplication of coordinates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkit::{det, rank_basis, solve, CMatrix, C64, ONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Power {
    Direct,
    Dual,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetElement {
    pub space_dim: usize,
    pub ref_basis_id: String,
    pub coord: C64,
    pub power: Power,
}

impl DetElement {
    pub fn new(space_dim: usize, ref_basis_id: impl Into<String>, coord: C64) -> Self {
        Self {
            space_dim,
            ref_basis_id: ref_basis_id.into(),
            coord,
            power: Power::Direct,
        }
    }

    /// Element of the dual line pairing to 1 with `self`.
    pub fn inverse(&self) -> Self {
        Self {
            space_dim: self.space_dim,
            ref_basis_id: self.ref_basis_id.clone(),
            coord: ONE / self.coord,
            power: match self.power {
                Power::Direct => Power::Dual,
                Power::Dual => Power::Direct,
            },
        }
    }

    /// Evaluates a dual element on a direct one (or vice versa).
    pub fn pair(&self, other: &DetElement) -> Result<C64> {
        if self.power == other.power {
            return Err(Error::Contract(
                "pairing needs one direct and one dual element".into(),
            ));
        }
        if self.space_dim != other.space_dim || self.ref_basis_id != other.ref_basis_id {
            return Err(Error::Contract(format!(
                "pairing elements over different trivializations: {} vs {}",
                self.ref_basis_id, other.ref_basis_id
            )));
        }
        Ok(self.coord * other.coord)
    }

    /// Re-expresses the element against a new reference basis. `t` holds the
    /// old reference vectors expressed in the new basis (old = new * t).
    pub fn rebase(&self, t: &CMatrix, new_id: impl Into<String>) -> Result<Self> {
        if t.shape() != (self.space_dim, self.space_dim) {
            return Err(Error::Shape(format!(
                "transition matrix is {}x{}, line has dimension {}",
                t.rows(),
                t.cols(),
                self.space_dim
            )));
        }
        let dt = det(t)?;
        let coord = match self.power {
            Power::Direct => self.coord * dt,
            Power::Dual => self.coord / dt,
        };
        Ok(Self {
            coord,
            ref_basis_id: new_id.into(),
            ..self.clone()
        })
    }
}

/// Element of `Det(V0) (x) Det(V1)^{-1}` for a two-term graded space.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedDet {
    pub dims: (usize, usize),
    pub basis_id: String,
    pub coord: C64,
}

impl GradedDet {
    pub fn from_parts(even: &DetElement, odd: &DetElement) -> Result<Self> {
        if even.power != Power::Direct || odd.power != Power::Direct {
            return Err(Error::Contract(
                "graded element expects direct factors".into(),
            ));
        }
        Ok(Self {
            dims: (even.space_dim, odd.space_dim),
            basis_id: even.ref_basis_id.clone(),
            coord: even.coord / odd.coord,
        })
    }
}

/// Coordinate of `v_1 ^ ... ^ v_n` (columns of `vectors`) against the wedge
/// of the columns of `ref_basis`.
pub fn wedge_coord(vectors: &CMatrix, ref_basis: &CMatrix) -> Result<C64> {
    let n = ref_basis.rows();
    if !ref_basis.is_square() || vectors.rows() != n || vectors.cols() != n {
        return Err(Error::Shape(format!(
            "{} vectors of length {} against a {}x{} reference basis",
            vectors.cols(),
            vectors.rows(),
            ref_basis.rows(),
            ref_basis.cols()
        )));
    }
    if n == 0 {
        return Ok(ONE);
    }
    let coords = solve(ref_basis, vectors)?;
    Ok(det(&coords)?)
}

/// Sign of the swap `V (+) W -> W (+) V` on determinant lines.
pub fn fusion_sign(dim_v: usize, dim_w: usize) -> i8 {
    if (dim_v * dim_w) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Sign attached to fusing two graded two-term spaces: `(-1)^(n1 * m0)`.
pub fn graded_fusion_sign(dims_c: (usize, usize), dims_ct: (usize, usize)) -> i8 {
    if (dims_c.1 * dims_ct.0) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Fuses direct elements over `V_1, ..., V_r` into `Det(V_1 (+) ... (+) V_r)`
/// against the concatenated reference basis.
pub fn multi_fusion(elements: &[DetElement]) -> Result<DetElement> {
    if elements.iter().any(|e| e.power != Power::Direct) {
        return Err(Error::Contract(
            "multi_fusion expects direct elements only".into(),
        ));
    }
    let space_dim = elements.iter().map(|e| e.space_dim).sum();
    let coord = elements.iter().fold(ONE, |acc, e| acc * e.coord);
    let ref_basis_id = elements
        .iter()
        .map(|e| e.ref_basis_id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    Ok(DetElement {
        space_dim,
        ref_basis_id,
        coord,
        power: Power::Direct,
    })
}

/// Sign relating the concatenated reference wedge of blocks taken in the order
/// `perm` to the one in natural order.
pub fn block_permutation_sign(dims: &[usize], perm: &[usize]) -> i8 {
    let mut parity = 0usize;
    for i in 0..perm.len() {
        for j in i + 1..perm.len() {
            if perm[i] > perm[j] {
                parity += dims[perm[i]] * dims[perm[j]];
            }
        }
    }
    if parity % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Coordinate of a fused element when the factors are concatenated in the
/// order `perm` but the reference basis stays in natural order.
pub fn fuse_in_order(elements: &[DetElement], perm: &[usize]) -> Result<DetElement> {
    let reordered: Vec<DetElement> = perm.iter().map(|&i| elements[i].clone()).collect();
    let mut fused = multi_fusion(&reordered)?;
    let dims: Vec<usize> = elements.iter().map(|e| e.space_dim).collect();
    fused.coord *= f64::from(block_permutation_sign(&dims, perm));
    fused.ref_basis_id = elements
        .iter()
        .map(|e| e.ref_basis_id.as_str())
        .collect::<Vec<_>>()
        .join("+");
    Ok(fused)
}

/// True when the columns of `vectors` are linearly independent.
pub fn is_independent(vectors: &CMatrix, rank_tol: f64) -> bool {
    vectors.cols() == 0 || rank_basis(vectors, rank_tol).rank == vectors.cols()
}
