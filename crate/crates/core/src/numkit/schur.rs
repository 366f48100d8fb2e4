use super::matrix::{CMatrix, C64, ONE, ZERO};
use super::{require_square, NumError};

/// Complex Schur form `A = Q T Q^H`.
#[derive(Debug, Clone)]
pub struct Schur {
    pub q: CMatrix,
    pub t: CMatrix,
}

impl Schur {
    pub fn eigenvalues(&self) -> Vec<C64> {
        self.t.diagonal()
    }
}

/// Householder reduction to upper Hessenberg form, `A = Q H Q^H`.
pub fn hessenberg(a: &CMatrix) -> Result<(CMatrix, CMatrix), NumError> {
    require_square(a, "Hessenberg reduction")?;
    let n = a.rows();
    let mut h = a.clone();
    let mut q = CMatrix::identity(n);
    for k in 0..n.saturating_sub(2) {
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let tail = x[1..].iter().map(|z| z.norm_sqr()).sum::<f64>();
        if tail == 0.0 {
            continue;
        }
        let phase = if x[0] == ZERO {
            ONE
        } else {
            x[0] / x[0].norm()
        };
        let mut v = x.clone();
        v[0] += phase * xnorm;
        let vnorm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        for z in v.iter_mut() {
            *z /= vnorm;
        }
        // H <- P H P with P = I - 2 v v^H acting on rows/cols k+1..n
        for j in 0..n {
            let dot: C64 = (0..v.len()).map(|i| v[i].conj() * h[(k + 1 + i, j)]).sum();
            for i in 0..v.len() {
                h[(k + 1 + i, j)] -= v[i] * dot * 2.0;
            }
        }
        for m in [&mut h, &mut q] {
            for i in 0..n {
                let dot: C64 = (0..v.len()).map(|j| m[(i, k + 1 + j)] * v[j]).sum();
                for j in 0..v.len() {
                    m[(i, k + 1 + j)] -= dot * v[j].conj() * 2.0;
                }
            }
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
    Ok((q, h))
}

/// Givens pair `(c, s)` with `[[conj c, conj s], [-s, c]] (a, b)^T = (r, 0)^T`.
fn givens(a: C64, b: C64) -> (C64, C64) {
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 {
        (ONE, ZERO)
    } else {
        (a / r, b / r)
    }
}

fn rotate_rows(m: &mut CMatrix, k: usize, c: C64, s: C64, cols: std::ops::Range<usize>) {
    for j in cols {
        let x = m[(k, j)];
        let y = m[(k + 1, j)];
        m[(k, j)] = c.conj() * x + s.conj() * y;
        m[(k + 1, j)] = -s * x + c * y;
    }
}

fn rotate_cols(m: &mut CMatrix, k: usize, c: C64, s: C64, rows: std::ops::Range<usize>) {
    for i in rows {
        let x = m[(i, k)];
        let y = m[(i, k + 1)];
        m[(i, k)] = x * c + y * s;
        m[(i, k + 1)] = -x * s.conj() + y * c.conj();
    }
}

fn wilkinson_shift(h: &CMatrix, hi: usize) -> C64 {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let c = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let half_tr = (a + d) * 0.5;
    let disc = ((a - d) * 0.5 * ((a - d) * 0.5) + b * c).sqrt();
    let l1 = half_tr + disc;
    let l2 = half_tr - disc;
    if (l1 - d).norm() <= (l2 - d).norm() {
        l1
    } else {
        l2
    }
}

/// Complex Schur decomposition by Hessenberg reduction followed by
/// single-shift QR with Wilkinson shifts and deflation.
pub fn schur(a: &CMatrix) -> Result<Schur, NumError> {
    require_square(a, "Schur decomposition")?;
    let n = a.rows();
    if n == 0 {
        return Ok(Schur {
            q: CMatrix::zeros(0, 0),
            t: CMatrix::zeros(0, 0),
        });
    }
    let (mut q, mut h) = hessenberg(a)?;
    let norm = h.frobenius_norm();
    let eps = f64::EPSILON;
    let max_iter = 30 * n.max(2);
    let mut total = 0usize;
    let mut since_deflation = 0usize;
    let mut hi = n - 1;

    while hi > 0 {
        // locate the start of the active unreduced block
        let mut l = hi;
        while l > 0 {
            let sub = h[(l, l - 1)].norm();
            let mut scale = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if scale == 0.0 {
                scale = norm;
            }
            if sub <= eps * scale || sub < f64::MIN_POSITIVE {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            since_deflation = 0;
            continue;
        }
        total += 1;
        since_deflation += 1;
        if total > max_iter {
            return Err(NumError::Convergence { iterations: total });
        }
        let shift = if since_deflation % 10 == 0 {
            let sub = h[(hi, hi - 1)].norm();
            h[(hi, hi)] + C64::new(0.75 * sub, 0.4375 * sub)
        } else {
            wilkinson_shift(&h, hi)
        };

        for k in l..=hi {
            h[(k, k)] -= shift;
        }
        let mut rots = Vec::with_capacity(hi - l);
        for k in l..hi {
            let (c, s) = givens(h[(k, k)], h[(k + 1, k)]);
            rotate_rows(&mut h, k, c, s, k..n);
            h[(k + 1, k)] = ZERO;
            rots.push((k, c, s));
        }
        for &(k, c, s) in &rots {
            rotate_cols(&mut h, k, c, s, 0..(k + 2).min(hi + 1));
            rotate_cols(&mut q, k, c, s, 0..n);
        }
        for k in l..=hi {
            h[(k, k)] += shift;
        }
    }

    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = ZERO;
        }
    }
    Ok(Schur { q, t: h })
}

/// Reorders a Schur form so that `keys` (one per diagonal entry) become
/// non-decreasing, using adjacent unitary swaps. Entries with equal keys are
/// never swapped with each other. Returns the permuted keys.
pub fn reorder_schur(s: &mut Schur, keys: &[usize]) -> Vec<usize> {
    let n = s.t.rows();
    assert_eq!(keys.len(), n);
    let mut keys = keys.to_vec();
    for i in 1..n {
        let mut k = i;
        while k > 0 && keys[k - 1] > keys[k] {
            swap_adjacent(s, k - 1);
            keys.swap(k - 1, k);
            k -= 1;
        }
    }
    keys
}

fn swap_adjacent(s: &mut Schur, k: usize) {
    let n = s.t.rows();
    let t11 = s.t[(k, k)];
    let t12 = s.t[(k, k + 1)];
    let t22 = s.t[(k + 1, k + 1)];
    let v1 = t12;
    let v2 = t22 - t11;
    let nv = (v1.norm_sqr() + v2.norm_sqr()).sqrt();
    if nv == 0.0 {
        return;
    }
    // G = [[v1, -conj v2], [v2, conj v1]] / |v| has the t22-eigenvector first
    let (c, sn) = (v1 / nv, v2 / nv);
    rotate_rows(&mut s.t, k, c, sn, k..n);
    rotate_cols(&mut s.t, k, c, sn, 0..(k + 2));
    rotate_cols(&mut s.q, k, c, sn, 0..n);
    s.t[(k + 1, k)] = ZERO;
    s.t[(k, k)] = t22;
    s.t[(k + 1, k + 1)] = t11;
}
