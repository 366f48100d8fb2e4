use super::matrix::{CMatrix, C64, ZERO};
use super::schur::{reorder_schur, schur};
use super::{require_square, NumError};

/// A generalized eigenspace together with its spectral projector.
#[derive(Debug, Clone)]
pub struct SpectralCluster {
    pub center: C64,
    pub alg_mult: usize,
    pub eigenvalues: Vec<C64>,
    pub basis: CMatrix,
    pub projector: CMatrix,
}

#[derive(Debug, Clone)]
pub struct ClusterSet {
    pub clusters: Vec<SpectralCluster>,
    /// Two distinct clusters are closer than ten times the merge threshold.
    pub near_merge_warning: bool,
    pub merge_threshold: f64,
}

/// Single-linkage clustering of eigenvalues with an absolute threshold.
/// Returns a cluster label per eigenvalue; labels are ordered by the
/// lexicographic (re, im) order of the cluster means.
pub fn cluster_eigenvalues(ev: &[C64], threshold: f64) -> (Vec<usize>, bool) {
    let n = ev.len();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(p: &mut [usize], i: usize) -> usize {
        let mut r = i;
        while p[r] != r {
            r = p[r];
        }
        let mut k = i;
        while p[k] != r {
            let next = p[k];
            p[k] = r;
            k = next;
        }
        r
    }
    for i in 0..n {
        for j in i + 1..n {
            if (ev[i] - ev[j]).norm() <= threshold {
                let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                if a != b {
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let roots: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    let mut distinct: Vec<usize> = roots.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let mean = |r: usize| {
        let members: Vec<C64> = (0..n).filter(|&i| roots[i] == r).map(|i| ev[i]).collect();
        members.iter().sum::<C64>() / members.len() as f64
    };
    let mut order: Vec<(usize, C64)> = distinct.iter().map(|&r| (r, mean(r))).collect();
    order.sort_by(|a, b| a.1.re.total_cmp(&b.1.re).then(a.1.im.total_cmp(&b.1.im)));
    let labels: Vec<usize> = roots
        .iter()
        .map(|r| order.iter().position(|(o, _)| o == r).unwrap())
        .collect();

    let mut warn = false;
    for i in 0..n {
        for j in i + 1..n {
            if labels[i] != labels[j] {
                let gap = (ev[i] - ev[j]).norm();
                if gap > threshold && gap <= 10.0 * threshold {
                    warn = true;
                }
            }
        }
    }
    (labels, warn)
}

/// Solves `T1 X - X T2 = C` for upper triangular `T1`, `T2`, column by column.
pub fn sylvester_triangular(
    t1: &CMatrix,
    t2: &CMatrix,
    c: &CMatrix,
    overlap_tol: f64,
) -> Result<CMatrix, NumError> {
    let (p, q) = (t1.rows(), t2.rows());
    if c.shape() != (p, q) {
        return Err(NumError::Shape(format!(
            "Sylvester right-hand side is {}x{}, expected {p}x{q}",
            c.rows(),
            c.cols()
        )));
    }
    let mut x = CMatrix::zeros(p, q);
    for j in 0..q {
        let mut rhs: Vec<C64> = (0..p).map(|i| c[(i, j)]).collect();
        for l in 0..j {
            let t = t2[(l, j)];
            if t != ZERO {
                for (i, r) in rhs.iter_mut().enumerate() {
                    *r += x[(i, l)] * t;
                }
            }
        }
        let mu = t2[(j, j)];
        for i in (0..p).rev() {
            let mut s = rhs[i];
            for k in i + 1..p {
                s -= t1[(i, k)] * x[(k, j)];
            }
            let piv = t1[(i, i)] - mu;
            if piv.norm() <= overlap_tol {
                return Err(NumError::SpectraOverlap { gap: piv.norm() });
            }
            x[(i, j)] = s / piv;
        }
    }
    Ok(x)
}

/// Solves `A X - X B = C` through Schur forms of `A` and `B`.
pub fn sylvester(a: &CMatrix, b: &CMatrix, c: &CMatrix) -> Result<CMatrix, NumError> {
    require_square(a, "sylvester A")?;
    require_square(b, "sylvester B")?;
    let sa = schur(a)?;
    let sb = schur(b)?;
    let scale = a.frobenius_norm().max(b.frobenius_norm()).max(1.0);
    let gap = sa
        .eigenvalues()
        .iter()
        .flat_map(|x| sb.eigenvalues().into_iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min);
    if gap <= 1e-10 * scale {
        return Err(NumError::SpectraOverlap { gap });
    }
    if c.shape() != (a.rows(), b.rows()) {
        return Err(NumError::Shape("Sylvester right-hand side shape".into()));
    }
    let f = sa.q.adjoint().matmul(c).matmul(&sb.q);
    let y = sylvester_triangular(&sa.t, &sb.t, &f, 0.0)?;
    Ok(sa.q.matmul(&y).matmul(&sb.q.adjoint()))
}

/// For a block upper triangular `T` with diagonal block sizes `sizes`, returns
/// the unit block upper triangular `W` with `T W = W blockdiag(T_ii)`.
pub fn block_decouple(t: &CMatrix, sizes: &[usize]) -> Result<CMatrix, NumError> {
    let n = t.rows();
    let offsets: Vec<usize> = sizes
        .iter()
        .scan(0, |acc, &s| {
            let o = *acc;
            *acc += s;
            Some(o)
        })
        .collect();
    let nb = sizes.len();
    let range = |i: usize| offsets[i]..offsets[i] + sizes[i];
    let mut w = CMatrix::identity(n);
    let scale = t.frobenius_norm().max(f64::MIN_POSITIVE);
    for j in 0..nb {
        let rj = range(j);
        let tjj = t.block(rj.start, rj.end, rj.start, rj.end);
        for i in (0..j).rev() {
            let ri = range(i);
            let tii = t.block(ri.start, ri.end, ri.start, ri.end);
            let mut rhs = -&t.block(ri.start, ri.end, rj.start, rj.end);
            for l in i + 1..j {
                let rl = range(l);
                let til = t.block(ri.start, ri.end, rl.start, rl.end);
                let wlj = w.block(rl.start, rl.end, rj.start, rj.end);
                rhs = &rhs - &til.matmul(&wlj);
            }
            let wij = sylvester_triangular(&tii, &tjj, &rhs, 1e-14 * scale)?;
            w.set_block(ri.start, rj.start, &wij);
        }
    }
    Ok(w)
}

fn unit_upper_inverse(w: &CMatrix) -> CMatrix {
    let n = w.rows();
    let mut x = CMatrix::identity(n);
    for j in 0..n {
        for i in (0..j).rev() {
            let mut s = ZERO;
            for k in i + 1..=j {
                s -= w[(i, k)] * x[(k, j)];
            }
            x[(i, j)] = s;
        }
    }
    x
}

/// Generalized eigenspaces and spectral projectors of `a`, merging eigenvalues
/// closer than `cluster_tol * ||a||_F`.
pub fn eig_clusters(a: &CMatrix, cluster_tol: f64) -> Result<ClusterSet, NumError> {
    require_square(a, "eig_clusters")?;
    let n = a.rows();
    let threshold = cluster_tol * a.frobenius_norm();
    let mut s = schur(a)?;
    let (labels, warn) = cluster_eigenvalues(&s.eigenvalues(), threshold);
    let keys = reorder_schur(&mut s, &labels);
    let nclusters = keys.iter().max().map_or(0, |m| m + 1);
    let sizes: Vec<usize> = (0..nclusters)
        .map(|c| keys.iter().filter(|&&k| k == c).count())
        .collect();
    let w = block_decouple(&s.t, &sizes)?;
    let v = s.q.matmul(&w);
    let vinv = unit_upper_inverse(&w).matmul(&s.q.adjoint());
    let ev = s.eigenvalues();
    let mut clusters = Vec::with_capacity(nclusters);
    let mut start = 0;
    for &size in &sizes {
        let end = start + size;
        let basis = v.columns(start, end);
        let projector = basis.matmul(&vinv.rows_range(start, end));
        let eigenvalues = ev[start..end].to_vec();
        let center = eigenvalues.iter().sum::<C64>() / size as f64;
        clusters.push(SpectralCluster {
            center,
            alg_mult: size,
            eigenvalues,
            basis,
            projector,
        });
        start = end;
    }
    debug_assert_eq!(start, n);
    Ok(ClusterSet {
        clusters,
        near_merge_warning: warn,
        merge_threshold: threshold,
    })
}

/// Invariant splitting `C^n = V_sel + V_rest` of a square matrix, with dual
/// row blocks: `[sel_rows; rest_rows] = [sel_basis, rest_basis]^{-1}`.
#[derive(Debug, Clone)]
pub struct TwoWaySplit {
    pub sel_basis: CMatrix,
    pub rest_basis: CMatrix,
    pub sel_rows: CMatrix,
    pub rest_rows: CMatrix,
    pub sel_eigenvalues: Vec<C64>,
    pub rest_eigenvalues: Vec<C64>,
}

impl TwoWaySplit {
    pub fn sel_projector(&self) -> CMatrix {
        self.sel_basis.matmul(&self.sel_rows)
    }

    pub fn rest_projector(&self) -> CMatrix {
        self.rest_basis.matmul(&self.rest_rows)
    }
}

/// Splits the spectrum of `a` by a predicate on eigenvalues. The selected
/// invariant subspace has an orthonormal basis; the complementary one is
/// obtained by Sylvester decoupling.
pub fn split_spectrum(a: &CMatrix, select: impl Fn(C64) -> bool) -> Result<TwoWaySplit, NumError> {
    require_square(a, "split_spectrum")?;
    let n = a.rows();
    let mut s = schur(a)?;
    let keys: Vec<usize> = s
        .eigenvalues()
        .iter()
        .map(|&z| usize::from(!select(z)))
        .collect();
    let keys = reorder_schur(&mut s, &keys);
    let p = keys.iter().filter(|&&k| k == 0).count();
    let ev = s.eigenvalues();
    let t11 = s.t.block(0, p, 0, p);
    let t22 = s.t.block(p, n, p, n);
    let t12 = s.t.block(0, p, p, n);
    let scale = s.t.frobenius_norm().max(f64::MIN_POSITIVE);
    let y = sylvester_triangular(&t11, &t22, &(-&t12), 1e-14 * scale)?;
    let q1 = s.q.columns(0, p);
    let q2 = s.q.columns(p, n);
    let qh = s.q.adjoint();
    let q1h = qh.rows_range(0, p);
    let q2h = qh.rows_range(p, n);
    Ok(TwoWaySplit {
        rest_basis: &q1.matmul(&y) + &q2,
        sel_basis: q1,
        sel_rows: &q1h - &y.matmul(&q2h),
        rest_rows: q2h,
        sel_eigenvalues: ev[..p].to_vec(),
        rest_eigenvalues: ev[p..].to_vec(),
    })
}
