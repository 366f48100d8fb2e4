#![allow(dead_code)]

use cmtorsion::numkit::{c64, inverse, CMatrix, C64, ONE};
use cmtorsion::torsion::ReferenceBases;
use cmtorsion::{BiComplex, EvenOp, OddOp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_c(rng: &mut ChaCha8Rng) -> C64 {
    c64(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

pub fn rand_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> CMatrix {
    CMatrix::from_fn(r, c, |_, _| rand_c(rng))
}

/// Identity plus a moderate random perturbation.
pub fn rand_similarity(rng: &mut ChaCha8Rng, n: usize) -> CMatrix {
    let g = rand_matrix(rng, n, n).scale_real(0.3);
    &CMatrix::identity(n) + &g
}

pub fn rel_err(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

/// A complex conjugated from a rank normal form whose torsion is known in
/// closed form: each pair `e0 <-> e1` with `d` coefficient `a` and `d*`
/// coefficient `b` contributes `ab` when `d` raises parity and `1/(ab)`
/// otherwise; the harmonic part contributes 1 against matching bases.
pub struct NormalForm {
    pub complex: BiComplex,
    pub bases: ReferenceBases,
    pub tau: C64,
    /// `|mu| = |ab|` per pair.
    pub moduli: Vec<f64>,
}

pub fn normal_form(rng: &mut ChaCha8Rng, pairs: usize, harmonic: (usize, usize)) -> NormalForm {
    let (n0, n1) = (pairs + harmonic.0, pairs + harmonic.1);
    let mut d = OddOp::zeros(n0, n1);
    let mut ds = OddOp::zeros(n0, n1);
    let mut tau = ONE;
    let mut moduli = Vec::new();
    for p in 0..pairs {
        let a = c64(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
        let b = c64(rng.gen_range(0.5..2.0), rng.gen_range(-1.0..1.0));
        moduli.push((a * b).norm());
        if rng.gen_bool(0.5) {
            d.eo[(p, p)] = a;
            ds.oe[(p, p)] = b;
            tau *= a * b;
        } else {
            d.oe[(p, p)] = a;
            ds.eo[(p, p)] = b;
            tau /= a * b;
        }
    }
    let s = EvenOp {
        even: rand_similarity(rng, n0),
        odd: rand_similarity(rng, n1),
    };
    let sinv = EvenOp {
        even: inverse(&s.even).unwrap(),
        odd: inverse(&s.odd).unwrap(),
    };
    let complex = BiComplex::from_ops(d.sandwich(&s, &sinv), ds.sandwich(&s, &sinv)).unwrap();
    let harm = [s.even.columns(pairs, n0), s.odd.columns(pairs, n1)];
    let bases = ReferenceBases {
        coh: harm.clone(),
        hom: harm,
        coh_id: "oracle".into(),
        hom_id: "oracle".into(),
    };
    NormalForm {
        complex,
        bases,
        tau,
        moduli,
    }
}

/// Cut values lying strictly inside the gaps of `moduli`, plus one above all.
pub fn cuts_in_gaps(moduli: &[f64]) -> Vec<f64> {
    let mut m: Vec<f64> = moduli.to_vec();
    m.push(0.0);
    m.sort_by(f64::total_cmp);
    m.dedup_by(|a, b| (*a - *b).abs() < 1e-3);
    let mut cuts: Vec<f64> = m
        .windows(2)
        .filter(|w| w[1] - w[0] > 1e-2)
        .map(|w| 0.5 * (w[0] + w[1]))
        .collect();
    cuts.push(m.last().copied().unwrap_or(0.0) * 2.0 + 1.0);
    cuts
}
