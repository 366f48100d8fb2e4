use super::matrix::{CMatrix, C64, ONE, ZERO};
use super::{require_square, NumError};
use crate::config::DEFAULT_RANK_TOL;

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct Lu {
    lu: CMatrix,
    perm: Vec<usize>,
    sign: f64,
}

impl Lu {
    pub fn new(a: &CMatrix) -> Result<Self, NumError> {
        require_square(a, "LU")?;
        let n = a.rows();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut sign = 1.0;
        for k in 0..n {
            let (p, _) = (k..n)
                .map(|i| (i, lu[(i, k)].norm()))
                .fold(
                    (k, -1.0),
                    |best, cur| if cur.1 > best.1 { cur } else { best },
                );
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                sign = -sign;
            }
            let pivot = lu[(k, k)];
            if pivot == ZERO {
                continue;
            }
            for i in k + 1..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                if f == ZERO {
                    continue;
                }
                for j in k + 1..n {
                    let u = lu[(k, j)];
                    lu[(i, j)] -= f * u;
                }
            }
        }
        Ok(Self { lu, perm, sign })
    }

    pub fn det(&self) -> C64 {
        let n = self.lu.rows();
        (0..n).fold(C64::new(self.sign, 0.0), |acc, i| acc * self.lu[(i, i)])
    }

    /// Ratio of the smallest to the largest pivot magnitude. Cheap and crude,
    /// but it is exactly zero for a numerically singular factorization.
    pub fn rcond_estimate(&self) -> f64 {
        let n = self.lu.rows();
        if n == 0 {
            return 1.0;
        }
        let mags: Vec<f64> = (0..n).map(|i| self.lu[(i, i)].norm()).collect();
        let max = mags.iter().cloned().fold(0.0, f64::max);
        let min = mags.iter().cloned().fold(f64::INFINITY, f64::min);
        if max == 0.0 {
            0.0
        } else {
            min / max
        }
    }

    pub fn solve(&self, b: &CMatrix, rank_tol: f64) -> Result<CMatrix, NumError> {
        let n = self.lu.rows();
        if b.rows() != n {
            return Err(NumError::Shape(format!(
                "right-hand side has {} rows, system has {n}",
                b.rows()
            )));
        }
        let rcond = self.rcond_estimate();
        if n > 0 && rcond <= rank_tol {
            return Err(NumError::Singular { rcond });
        }
        let mut x = b.select_rows(&self.perm);
        for c in 0..x.cols() {
            for i in 0..n {
                let mut s = x[(i, c)];
                for k in 0..i {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s;
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for k in i + 1..n {
                    s -= self.lu[(i, k)] * x[(k, c)];
                }
                x[(i, c)] = s / self.lu[(i, i)];
            }
        }
        Ok(x)
    }
}

pub fn det(a: &CMatrix) -> Result<C64, NumError> {
    if a.rows() == 0 && a.cols() == 0 {
        return Ok(ONE);
    }
    Ok(Lu::new(a)?.det())
}

/// Solves `A X = B` with the default rank tolerance.
pub fn solve(a: &CMatrix, b: &CMatrix) -> Result<CMatrix, NumError> {
    solve_tol(a, b, DEFAULT_RANK_TOL)
}

pub fn solve_tol(a: &CMatrix, b: &CMatrix, rank_tol: f64) -> Result<CMatrix, NumError> {
    Lu::new(a)?.solve(b, rank_tol)
}

pub fn inverse(a: &CMatrix) -> Result<CMatrix, NumError> {
    solve(a, &CMatrix::identity(a.rows()))
}
