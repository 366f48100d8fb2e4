mod common;

use cmtorsion::detline::{
    block_permutation_sign, fusion_sign, graded_fusion_sign, wedge_coord, DetElement,
};
use cmtorsion::numkit::CMatrix;
use common::*;

/// Parity of a permutation by counting inversions.
fn inversion_parity(p: &[usize]) -> usize {
    let mut n = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            if p[i] > p[j] {
                n += 1;
            }
        }
    }
    n % 2
}

fn sign_of(parity: usize) -> i8 {
    if parity == 0 {
        1
    } else {
        -1
    }
}

/// `v` sits in the first `dv` coordinates of `V (+) W`, `w` in the rest.
fn embed(v: &CMatrix, w: &CMatrix) -> (CMatrix, CMatrix) {
    let (dv, dw) = (v.rows(), w.rows());
    let mut ev = CMatrix::zeros(dv + dw, dv);
    ev.set_block(0, 0, v);
    let mut ew = CMatrix::zeros(dv + dw, dw);
    ew.set_block(dv, 0, w);
    (ev, ew)
}

#[test]
fn fusion_swap_sign_exhaustive_exact() {
    for dv in 0..=6usize {
        for dw in 0..=6usize {
            // integer diagonal vectors keep every determinant exact
            let v = CMatrix::diag_real(&(0..dv).map(|i| (i + 2) as f64).collect::<Vec<_>>());
            let w = CMatrix::diag_real(&(0..dw).map(|i| (i + 3) as f64).collect::<Vec<_>>());
            let (ev, ew) = embed(&v, &w);
            let n = dv + dw;
            let id = CMatrix::identity(n);
            let vw = wedge_coord(&CMatrix::hstack(n, &[&ev, &ew]), &id).unwrap();
            let wv = wedge_coord(&CMatrix::hstack(n, &[&ew, &ev]), &id).unwrap();
            assert_eq!(vw, wv * f64::from(fusion_sign(dv, dw)), "dims ({dv},{dw})");
        }
    }
}

#[test]
fn fusion_swap_sign_exhaustive_random() {
    let mut r = rng(31);
    for dv in 0..=6usize {
        for dw in 0..=6usize {
            let v = rand_similarity(&mut r, dv);
            let w = rand_similarity(&mut r, dw);
            let (ev, ew) = embed(&v, &w);
            let n = dv + dw;
            let id = CMatrix::identity(n);
            let vw = wedge_coord(&CMatrix::hstack(n, &[&ev, &ew]), &id).unwrap();
            let wv = wedge_coord(&CMatrix::hstack(n, &[&ew, &ev]), &id).unwrap();
            assert!(rel_err(vw, wv * f64::from(fusion_sign(dv, dw))) < 1e-12);
        }
    }
}

/// Moving the `n1` vectors of `Det(C^1)^{-1}` past the `m0` vectors of
/// `Det(C~^0)`, counted vector by vector.
#[test]
fn graded_fusion_sign_exhaustive() {
    for n0 in 0..=6usize {
        for n1 in 0..=6usize {
            for m0 in 0..=6usize {
                for m1 in 0..=6usize {
                    // items labelled by their position in [A0 A1 B0 B1]
                    let a0: Vec<usize> = (0..n0).collect();
                    let a1: Vec<usize> = (n0..n0 + n1).collect();
                    let b0: Vec<usize> = (n0 + n1..n0 + n1 + m0).collect();
                    let b1: Vec<usize> = (n0 + n1 + m0..n0 + n1 + m0 + m1).collect();
                    let target: Vec<usize> = [a0, b0, a1, b1].concat();
                    let want = sign_of(inversion_parity(&target));
                    assert_eq!(
                        graded_fusion_sign((n0, n1), (m0, m1)),
                        want,
                        "({n0},{n1}) x ({m0},{m1})"
                    );
                }
            }
        }
    }
}

#[test]
fn block_permutation_sign_exhaustive() {
    let perms: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for a in 0..=6usize {
        for b in 0..=6usize {
            for c in 0..=6usize {
                let dims = [a, b, c];
                let offsets = [0, a, a + b];
                for p in &perms {
                    let flat: Vec<usize> = p
                        .iter()
                        .flat_map(|&blk| (0..dims[blk]).map(move |i| offsets[blk] + i))
                        .collect();
                    let want = sign_of(inversion_parity(&flat));
                    assert_eq!(block_permutation_sign(&dims, p), want, "{dims:?} {p:?}");
                }
            }
        }
    }
}

#[test]
fn fused_coordinates_match_concatenated_wedges() {
    let mut r = rng(8);
    for (dv, dw) in [(1, 1), (2, 3), (3, 3), (0, 4)] {
        let v = rand_similarity(&mut r, dv);
        let w = rand_similarity(&mut r, dw);
        let ev = DetElement::new(dv, "v", wedge_coord(&v, &CMatrix::identity(dv)).unwrap());
        let ew = DetElement::new(dw, "w", wedge_coord(&w, &CMatrix::identity(dw)).unwrap());
        let fused = cmtorsion::detline::multi_fusion(&[ev, ew]).unwrap();
        let (xv, xw) = embed(&v, &w);
        let n = dv + dw;
        let direct = wedge_coord(&CMatrix::hstack(n, &[&xv, &xw]), &CMatrix::identity(n)).unwrap();
        assert!(rel_err(fused.coord, direct) < 1e-12);
    }
}
