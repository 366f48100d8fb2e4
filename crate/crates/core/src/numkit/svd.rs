use super::matrix::{CMatrix, C64};

const MAX_SWEEPS: usize = 80;

/// Thin singular value decomposition `A = U diag(s) V^H` with `s` sorted
/// descending. `u` is `rows x cols'`, `v` is `cols x cols` and unitary.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: CMatrix,
    pub s: Vec<f64>,
    pub v: CMatrix,
}

/// One-sided (Hestenes) Jacobi SVD. Wide inputs are padded with zero rows so
/// that `v` is always a full unitary basis of the domain.
pub fn svd(a: &CMatrix) -> Svd {
    let (m, n) = a.shape();
    let rows = m.max(n);
    let mut u = CMatrix::zeros(rows, n);
    u.set_block(0, 0, a);
    let mut v = CMatrix::identity(n);

    let eps = f64::EPSILON;
    // columns below this squared norm are numerically zero; rotating them
    // against each other only churns rounding noise
    let negligible = (eps * a.frobenius_norm()).powi(2) * 1e-4;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let mut alpha = 0.0;
                let mut beta = 0.0;
                let mut gamma = C64::new(0.0, 0.0);
                for i in 0..rows {
                    let up = u[(i, p)];
                    let uq = u[(i, q)];
                    alpha += up.norm_sqr();
                    beta += uq.norm_sqr();
                    gamma += up.conj() * uq;
                }
                let g = gamma.norm();
                if g == 0.0 || g <= eps * (alpha * beta).sqrt() || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let phase = gamma / g;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let pc = phase.conj();
                rotate(&mut u, p, q, c, s, pc);
                rotate(&mut v, p, q, c, s, pc);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<(usize, f64)> = (0..n)
        .map(|j| {
            (
                j,
                (0..rows).map(|i| u[(i, j)].norm_sqr()).sum::<f64>().sqrt(),
            )
        })
        .collect();
    sigma.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));

    let order: Vec<usize> = sigma.iter().map(|&(j, _)| j).collect();
    let s: Vec<f64> = sigma.iter().map(|&(_, x)| x).collect();
    let mut u_sorted = u.block(0, m, 0, n).select_columns(&order);
    for (j, &sj) in s.iter().enumerate() {
        if sj > 0.0 {
            for i in 0..m {
                u_sorted[(i, j)] /= sj;
            }
        }
    }
    Svd {
        u: u_sorted,
        s,
        v: v.select_columns(&order),
    }
}

fn rotate(m: &mut CMatrix, p: usize, q: usize, c: f64, s: f64, phase_conj: C64) {
    for i in 0..m.rows() {
        let xp = m[(i, p)];
        let xq = m[(i, q)] * phase_conj;
        m[(i, p)] = xp * c - xq * s;
        m[(i, q)] = xp * s + xq * c;
    }
}

/// Result of a rank decision: orthonormal bases for image, kernel and the
/// orthogonal complement of the kernel (co-range).
#[derive(Debug, Clone)]
pub struct RankBasis {
    pub rank: usize,
    pub col_basis: CMatrix,
    pub null_basis: CMatrix,
    pub corange: CMatrix,
    pub singular_values: Vec<f64>,
    /// Set when some singular value sits within a decade of the cutoff.
    pub ambiguous: bool,
}

/// Rank via singular values: `s_i <= rank_tol * s_max` counts as zero.
pub fn rank_basis(a: &CMatrix, rank_tol: f64) -> RankBasis {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return RankBasis {
            rank: 0,
            col_basis: CMatrix::zeros(m, 0),
            null_basis: CMatrix::identity(n),
            corange: CMatrix::zeros(n, 0),
            singular_values: Vec::new(),
            ambiguous: false,
        };
    }
    let Svd { u, s, v } = svd(a);
    let smax = s.first().copied().unwrap_or(0.0);
    let cutoff = rank_tol * smax;
    let rank = if smax == 0.0 {
        0
    } else {
        s.iter().take(m.min(n)).filter(|&&x| x > cutoff).count()
    };
    let ambiguous = smax > 0.0
        && s.iter()
            .any(|&x| x > 0.1 * cutoff && x <= 10.0 * cutoff && x != 0.0);
    RankBasis {
        rank,
        col_basis: u.columns(0, rank),
        null_basis: v.columns(rank, n),
        corange: v.columns(0, rank),
        singular_values: s,
        ambiguous,
    }
}

/// Orthonormal basis of the column span of `a`.
pub fn orthonormalize(a: &CMatrix, rank_tol: f64) -> CMatrix {
    rank_basis(a, rank_tol).col_basis
}

/// Orthonormal basis of the orthogonal complement of the column span of `a`.
pub fn orthonormal_complement(a: &CMatrix, rank_tol: f64) -> CMatrix {
    if a.cols() == 0 {
        return CMatrix::identity(a.rows());
    }
    rank_basis(&a.adjoint(), rank_tol).null_basis
}
