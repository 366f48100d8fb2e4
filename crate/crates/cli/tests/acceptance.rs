//! Acceptance run: one line per criterion.
//!
//! Criterion 5b is a known divergence. By default it prints FAIL and the run
//! only checks that the divergence is still the documented factor of two.
//! Pass `--strict` to make it fail the run.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use cmtorsion::bicomplex::{laplacian, validate, SplitData};
use cmtorsion::deform::{
    exact_rate, fd_rate, predicted_rate, within_policy, ConjugationFamily, ConjugationKind, Family,
    TorusMetricPath,
};
use cmtorsion::detline::{block_permutation_sign, fusion_sign, graded_fusion_sign, wedge_coord};
use cmtorsion::models::{
    chirality, random_bicomplex, random_even, sharp_conjugate, torus_model, Form, SpectralProfile,
    WedgeModel,
};
use cmtorsion::numkit::{c64, det, inverse, schur, CMatrix, C64, ONE};
use cmtorsion::torsion::{
    agmon_log_det, torsion_acyclic, torsion_definition, torsion_truncated, torsion_with_split,
    ReferenceBases,
};
use cmtorsion::{BiComplex, Cut, EvenOp, OddOp, Tolerances};
use cmtorsion_cli::ComplexDocument;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Pass,
    Fail,
    /// Fails as documented; the run still checks the documented behaviour.
    KnownFail,
}

struct Outcome {
    status: Status,
    detail: String,
}

fn verdict(ok: bool, detail: String) -> Outcome {
    Outcome {
        status: if ok { Status::Pass } else { Status::Fail },
        detail,
    }
}

fn tol() -> Tolerances {
    Tolerances::default()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn rand_c(r: &mut ChaCha8Rng) -> C64 {
    c64(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0))
}

fn rand_matrix(r: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| rand_c(r))
}

fn near_identity(r: &mut ChaCha8Rng, n: usize) -> CMatrix {
    &CMatrix::identity(n) + &rand_matrix(r, n, n).scale_real(0.3)
}

fn rel(a: C64, b: C64) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn laplacian_moduli(c: &BiComplex) -> Vec<f64> {
    let lap = laplacian(c);
    let mut m: Vec<f64> = [&lap.even, &lap.odd]
        .iter()
        .flat_map(|b| {
            schur(b)
                .unwrap()
                .eigenvalues()
                .into_iter()
                .map(|z| z.norm())
        })
        .collect();
    m.sort_by(f64::total_cmp);
    m
}

/// Midpoints of the gaps between distinct moduli, widest first.
fn gap_cuts(moduli: &[f64]) -> Vec<f64> {
    let mut m = moduli.to_vec();
    m.push(0.0);
    m.sort_by(f64::total_cmp);
    let mut gaps: Vec<(f64, f64)> = m
        .windows(2)
        .filter(|w| w[1] - w[0] > 1e-3 * w[1].max(1.0))
        .map(|w| ((w[1] - w[0]) / w[1].max(1.0), 0.5 * (w[0] + w[1])))
        .collect();
    gaps.sort_by(|a, b| b.0.total_cmp(&a.0));
    gaps.into_iter().map(|g| g.1).collect()
}

/// Rank normal form conjugated by a random similarity, with its torsion in
/// closed form against the harmonic columns of the similarity.
struct NormalForm {
    complex: BiComplex,
    bases: ReferenceBases,
    tau: C64,
}

fn normal_form(r: &mut ChaCha8Rng, pairs: usize, harmonic: (usize, usize)) -> NormalForm {
    let (n0, n1) = (pairs + harmonic.0, pairs + harmonic.1);
    let mut d = OddOp::zeros(n0, n1);
    let mut ds = OddOp::zeros(n0, n1);
    let mut tau = ONE;
    for p in 0..pairs {
        let a = c64(r.gen_range(0.5..2.0), r.gen_range(-1.0..1.0));
        let b = c64(r.gen_range(0.5..2.0), r.gen_range(-1.0..1.0));
        if r.gen_bool(0.5) {
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
        even: near_identity(r, n0),
        odd: near_identity(r, n1),
    };
    let sinv = EvenOp {
        even: inverse(&s.even).unwrap(),
        odd: inverse(&s.odd).unwrap(),
    };
    let complex = BiComplex::from_ops(d.sandwich(&s, &sinv), ds.sandwich(&s, &sinv)).unwrap();
    let harm = [s.even.columns(pairs, n0), s.odd.columns(pairs, n1)];
    NormalForm {
        complex,
        bases: ReferenceBases {
            coh: harm.clone(),
            hom: harm,
            coh_id: "oracle".into(),
            hom_id: "oracle".into(),
        },
        tau,
    }
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut count = 0;
    for seed in 0..200u64 {
        let p = 1 + (seed as usize % 16);
        let profile = if seed % 2 == 0 {
            SpectralProfile::default()
        } else {
            SpectralProfile::Independent
        };
        let c = random_bicomplex((p, p), (0, 0), &profile, seed).unwrap();
        let def = torsion_definition(&c, None, &tol()).unwrap().coord;
        let acy = torsion_acyclic(&c, &tol()).unwrap();
        worst = worst.max(rel(def, acy));
        count += 1;
    }
    let e1 = BiComplex::new(
        CMatrix::from_real_rows(&[&[2.0]]),
        CMatrix::zeros(1, 1),
        CMatrix::zeros(1, 1),
        CMatrix::from_real_rows(&[&[3.0]]),
    )
    .unwrap();
    let e1_err = rel(
        torsion_definition(&e1, None, &tol()).unwrap().coord,
        c64(6.0, 0.0),
    )
    .max(rel(torsion_acyclic(&e1, &tol()).unwrap(), c64(6.0, 0.0)));
    let mut ba_err: f64 = 0.0;
    let mut r = rng(11);
    for n in 1..=8 {
        let a = near_identity(&mut r, n);
        let b = near_identity(&mut r, n);
        let c = BiComplex::new(
            a.clone(),
            CMatrix::zeros(n, n),
            CMatrix::zeros(n, n),
            b.clone(),
        )
        .unwrap();
        let want = det(&b.matmul(&a)).unwrap();
        ba_err = ba_err
            .max(rel(
                torsion_definition(&c, None, &tol()).unwrap().coord,
                want,
            ))
            .max(rel(torsion_acyclic(&c, &tol()).unwrap(), want));
    }
    let ok = worst <= 1e-8 && e1_err <= 1e-8 && ba_err <= 1e-8;
    verdict(
        ok,
        format!("{count} acyclic complexes, max rel err {worst:.2e}; E1 err {e1_err:.1e}; det(BA) err {ba_err:.1e} (tol 1e-8)"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut min_cuts = usize::MAX;
    let mut non_acyclic = 0;
    for seed in 0..50u64 {
        let mut r = rng(2000 + seed);
        let p = r.gen_range(4..=6);
        let h = (r.gen_range(0..=2), r.gen_range(0..=2));
        if h != (0, 0) {
            non_acyclic += 1;
        }
        let c = random_bicomplex((p + h.0, p + h.1), h, &SpectralProfile::default(), seed).unwrap();
        let bases = ReferenceBases::for_complex(&c, tol().rank_tol);
        let reference = torsion_truncated(&c, Cut::Above, Some(&bases), None, &tol())
            .unwrap()
            .coord;
        let mut valid = 0;
        for l in gap_cuts(&laplacian_moduli(&c)) {
            if let Ok(t) = torsion_truncated(&c, Cut::At(l), Some(&bases), None, &tol()) {
                worst = worst.max(rel(t.coord, reference));
                valid += 1;
            }
        }
        min_cuts = min_cuts.min(valid + 1);
    }
    verdict(
        worst <= 1e-7 && min_cuts >= 4,
        format!("50 complexes ({non_acyclic} non-acyclic), >= {min_cuts} valid cuts each, max rel spread {worst:.2e} (tol 1e-7)"),
    )
}

fn inversion_parity(p: &[usize]) -> usize {
    let mut n = 0;
    for i in 0..p.len() {
        for j in i + 1..p.len() {
            n += usize::from(p[i] > p[j]);
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

fn criterion_3() -> Outcome {
    let mut sign_cases = 0;
    let mut sign_bad = 0;
    for dv in 0..=6usize {
        for dw in 0..=6usize {
            let n = dv + dw;
            let mut ev = CMatrix::zeros(n, dv);
            ev.set_block(
                0,
                0,
                &CMatrix::diag_real(&(0..dv).map(|i| (i + 2) as f64).collect::<Vec<_>>()),
            );
            let mut ew = CMatrix::zeros(n, dw);
            ew.set_block(
                dv,
                0,
                &CMatrix::diag_real(&(0..dw).map(|i| (i + 3) as f64).collect::<Vec<_>>()),
            );
            let id = CMatrix::identity(n);
            let vw = wedge_coord(&CMatrix::hstack(n, &[&ev, &ew]), &id).unwrap();
            let wv = wedge_coord(&CMatrix::hstack(n, &[&ew, &ev]), &id).unwrap();
            sign_cases += 1;
            sign_bad += usize::from(vw != wv * f64::from(fusion_sign(dv, dw)));
            for m0 in 0..=6usize {
                for m1 in 0..=6usize {
                    let target: Vec<usize> = [
                        (0..dv).collect::<Vec<_>>(),
                        (dv + dw..dv + dw + m0).collect(),
                        (dv..dv + dw).collect(),
                        (dv + dw + m0..dv + dw + m0 + m1).collect(),
                    ]
                    .concat();
                    sign_cases += 1;
                    sign_bad += usize::from(
                        graded_fusion_sign((dv, dw), (m0, m1))
                            != sign_of(inversion_parity(&target)),
                    );
                }
            }
        }
    }
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
                    sign_cases += 1;
                    sign_bad += usize::from(
                        block_permutation_sign(&dims, p) != sign_of(inversion_parity(&flat)),
                    );
                }
            }
        }
    }

    let mut worst: f64 = 0.0;
    for seed in 0..40u64 {
        let mut r = rng(5000 + seed);
        let pairs = r.gen_range(1..=4);
        let harmonic = (r.gen_range(0..=2), r.gen_range(0..=2));
        let nf = normal_form(&mut r, pairs, harmonic);
        let c = &nf.complex;
        let split = SplitData::new(c, tol().rank_tol);
        let base = torsion_with_split(c, &split, &nf.bases, [ONE, ONE])
            .unwrap()
            .coord;
        let cc = [rand_c(&mut r) + 2.0, rand_c(&mut r) + 2.0];
        worst = worst.max(rel(
            torsion_with_split(c, &split, &nf.bases, cc).unwrap().coord,
            base,
        ));
        let mut alt = split.clone();
        for side in [&mut alt.coh, &mut alt.hom] {
            for k in 0..2 {
                let kernel = CMatrix::hstack(side.a[k].rows(), &[&side.b[k], &side.h[k]]);
                let shift = kernel.matmul(&rand_matrix(&mut r, kernel.cols(), side.a[k].cols()));
                side.a[k] = &side.a[k] + &shift;
            }
        }
        for k in 0..2 {
            alt.coh.b[k] = c.d.into_parity(k).matmul(&alt.coh.a[(k + 1) % 2]);
            alt.hom.b[k] = c.ds.into_parity(k).matmul(&alt.hom.a[(k + 1) % 2]);
        }
        for side in [&mut alt.coh, &mut alt.hom] {
            for k in 0..2 {
                let shift =
                    side.b[k].matmul(&rand_matrix(&mut r, side.b[k].cols(), side.h[k].cols()));
                side.h[k] = &side.h[k] + &shift;
            }
        }
        worst = worst.max(rel(
            torsion_with_split(c, &alt, &nf.bases, cc).unwrap().coord,
            base,
        ));
        worst = worst.max(rel(base, nf.tau));
    }
    verdict(
        sign_bad == 0 && worst <= 1e-9,
        format!("{sign_cases} sign cases with {sign_bad} mismatches; choice independence over 40 complexes, max rel dev {worst:.2e} (tol 1e-9)"),
    )
}

fn criterion_4() -> Outcome {
    let mut worst: f64 = 0.0;
    for seed in 0..50u64 {
        let mut r = rng(9000 + seed);
        let n = r.gen_range(1..=7);
        let zeros = r.gen_range(0..=2).min(n - 1);
        let ev: Vec<C64> = (0..n)
            .map(|i| {
                if i < zeros {
                    return c64(0.0, 0.0);
                }
                let sector = [PI / 2.0, 1.3 * PI, 0.0][r.gen_range(0..3)];
                C64::from_polar(r.gen_range(0.3..3.0), sector + r.gen_range(-0.4..0.4))
            })
            .collect();
        let s = near_identity(&mut r, n);
        let a = s.matmul(&CMatrix::diag(&ev)).matmul(&inverse(&s).unwrap());
        let want: C64 = ev.iter().filter(|z| z.norm() > 0.0).product();
        for theta in [PI / 4.0, PI, 7.0 * PI / 4.0] {
            let got = agmon_log_det(&a, theta, 1e-7).unwrap().exp();
            worst = worst.max(rel(got, want));
        }
    }
    verdict(
        worst <= 1e-10,
        format!("50 spectra x 3 angles, max rel err vs eigenvalue product {worst:.2e} (tol 1e-10)"),
    )
}

const EPS: f64 = 1e-3;

fn acyclic_base(seed: u64) -> BiComplex {
    let mut r = rng(seed);
    let p = r.gen_range(1..=5);
    let profile = if seed % 2 == 0 {
        SpectralProfile::Independent
    } else {
        SpectralProfile::default()
    };
    random_bicomplex((p, p), (0, 0), &profile, seed).unwrap()
}

fn criterion_5a() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut passed = 0;
    for seed in 0..24u64 {
        let c = acyclic_base(seed);
        let alpha = random_even(c.n0, c.n1, 0.5, seed + 100);
        let f = ConjugationFamily::new(ConjugationKind::Metric, c, alpha, tol().rank_tol).unwrap();
        let fd = fd_rate(&f, 0.0, EPS, Cut::Above, &tol()).unwrap();
        let pred = predicted_rate(&f, 0.0, Cut::Above, &tol()).unwrap();
        worst = worst.max((fd - pred).norm() / pred.norm().max(1.0));
        passed += usize::from(within_policy(fd, pred, EPS));
    }
    verdict(
        passed == 24,
        format!(
            "{passed}/24 metric families within 10 eps^2 at eps 1e-3, max scaled err {worst:.2e}"
        ),
    )
}

fn criterion_5b() -> Outcome {
    let mut nilpotent_ok = 0;
    for seed in 0..20u64 {
        let c = acyclic_base(seed);
        let mut r = rng(seed);
        let upper = |r: &mut ChaCha8Rng, n: usize| {
            CMatrix::from_fn(n, n, |i, j| {
                if j > i {
                    rand_c(r) * 0.5
                } else {
                    c64(0.0, 0.0)
                }
            })
        };
        let beta = EvenOp {
            even: upper(&mut r, c.n0),
            odd: upper(&mut r, c.n1),
        };
        let f = ConjugationFamily::new(ConjugationKind::Flux, c, beta, tol().rank_tol).unwrap();
        let fd = fd_rate(&f, 0.0, EPS, Cut::Above, &tol()).unwrap();
        let pred = predicted_rate(&f, 0.0, Cut::Above, &tol()).unwrap();
        nilpotent_ok += usize::from(within_policy(fd, pred, EPS));
    }
    let mut generic_ok = 0;
    let mut ratio_dev: f64 = 0.0;
    let mut exact_ok = 0;
    for seed in 0..20u64 {
        let c = acyclic_base(seed);
        let beta = random_even(c.n0, c.n1, 0.5, seed + 500);
        let f = ConjugationFamily::new(ConjugationKind::Flux, c, beta, tol().rank_tol).unwrap();
        let fd = fd_rate(&f, 0.0, EPS, Cut::Above, &tol()).unwrap();
        let pred = predicted_rate(&f, 0.0, Cut::Above, &tol()).unwrap();
        let exact = exact_rate(&f, 0.0, Cut::Above, &tol()).unwrap();
        generic_ok += usize::from(within_policy(fd, pred, EPS));
        exact_ok += usize::from(within_policy(fd, exact, EPS));
        ratio_dev = ratio_dev.max(rel(fd / pred, c64(2.0, 0.0)));
    }
    let detail = format!(
        "nilpotent beta {nilpotent_ok}/20 within 10 eps^2; generic beta {generic_ok}/20, \
         fd/predicted = 2 to {ratio_dev:.1e}, fd vs -2 str(beta) {exact_ok}/20"
    );
    if nilpotent_ok == 20 && generic_ok == 20 {
        return verdict(true, detail);
    }
    let documented = nilpotent_ok == 20 && exact_ok == 20 && ratio_dev <= 1e-6;
    Outcome {
        status: if documented {
            Status::KnownFail
        } else {
            Status::Fail
        },
        detail,
    }
}

fn random_path(m: usize, seed: u64) -> (CMatrix, CMatrix) {
    let mut r = rng(seed);
    let x = CMatrix::from_fn(m, m, |_, _| c64(r.gen_range(-0.5..0.5), 0.0));
    let g0 = &CMatrix::identity(m) + &x.transpose().matmul(&x);
    let y = CMatrix::from_fn(m, m, |_, _| c64(r.gen_range(-0.3..0.3), 0.0));
    (g0, &y + &y.transpose())
}

fn run_cli(args: &[&str]) -> (i32, Vec<u8>) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = cmtorsion_cli::run(
        std::iter::once("cmtorsion").chain(args.iter().copied()),
        &mut out,
        &mut err,
    );
    (code, out)
}

fn criterion_6() -> Outcome {
    let fluxes = [
        (3usize, ["123:2.0", "123:0.5", "123:-1.3"]),
        (5, ["123:1.0", "145:0.7,234:-1.1", "12345:0.8,135:1.5"]),
    ];
    let mut worst: f64 = 0.0;
    let mut paths = 0;
    for (m, list) in fluxes {
        for flux in list {
            let flux: Form = flux.parse().unwrap();
            for path in 0..5u64 {
                let (g0, g1) = random_path(m, 40 * m as u64 + path);
                let p = TorusMetricPath::new(m, g0, g1, flux.clone(), 1, tol().rank_tol).unwrap();
                let values: Vec<C64> = [0.0, 0.1, 0.2, 0.3, 0.4]
                    .iter()
                    .map(|&u| {
                        let c = p.complex_at(u).unwrap();
                        let (coh, hom) = p.transport(u).unwrap();
                        let bases = p.base_bases().transport(&coh, &hom);
                        torsion_truncated(&c, Cut::Above, Some(&bases), None, &tol())
                            .unwrap()
                            .coord
                    })
                    .collect();
                for v in &values[1..] {
                    worst = worst.max(rel(*v, values[0]));
                }
                paths += 1;
            }
        }
    }
    let (code3, _) = run_cli(&[
        "sweep", "torus", "--family", "metric", "--m", "3", "--flux", "123:2.0", "--param",
        "0:0.5:6",
    ]);
    let (code5, _) = run_cli(&[
        "sweep",
        "torus",
        "--family",
        "metric",
        "--m",
        "5",
        "--flux",
        "12345:0.8,135:1.5",
        "--metric",
        "diag:1,2,1,1.5,1",
        "--param",
        "0:0.5:6",
    ]);
    verdict(
        worst <= 1e-6 && code3 == 0 && code5 == 0,
        format!("{paths} torus paths (m 3 and 5, 3 fluxes each), max rel drift {worst:.2e} (tol 1e-6); sweep exit codes {code3}, {code5}"),
    )
}

fn random_metric(r: &mut ChaCha8Rng, m: usize) -> CMatrix {
    let x = CMatrix::from_fn(m, m, |_, _| c64(r.gen_range(-1.0..1.0), 0.0));
    &CMatrix::identity(m).scale_real(0.2) + &x.transpose().matmul(&x)
}

fn random_flux(r: &mut ChaCha8Rng, m: usize) -> Form {
    let mut terms = Vec::new();
    for mask in 1u32..(1 << m) {
        let deg = mask.count_ones();
        if deg % 2 == 1 && deg >= 3 && r.gen_bool(0.6) {
            terms.push((mask, c64(r.gen_range(-2.0..2.0), 0.0)));
        }
    }
    if terms.is_empty() {
        terms.push((0b111, c64(1.0, 0.0)));
    }
    Form { terms }
}

fn criterion_7() -> Outcome {
    let mut r = rng(70);
    let mut gamma_worst: f64 = 0.0;
    for m in 1..=6usize {
        for i in 0..10 {
            let g = random_metric(&mut r, m);
            let orientation = if i % 2 == 0 { 1 } else { -1 };
            let gamma = chirality(m, &g, orientation).unwrap();
            gamma_worst =
                gamma_worst.max(gamma.matmul(&gamma).distance(&CMatrix::identity(1 << m)));
        }
    }
    let mut flux_worst: f64 = 0.0;
    let mut operators = 0;
    for m in 3..=6usize {
        let w = WedgeModel::new(m).unwrap();
        for _ in 0..10 {
            let flux = random_flux(&mut r, m);
            let g = random_metric(&mut r, m);
            let h = w.wedge_matrix(&flux).unwrap();
            let gamma = chirality(m, &g, 1).unwrap();
            let hs = sharp_conjugate(&gamma, &h).unwrap();
            let t = torus_model(m, &g, &flux, 1).unwrap();
            let d = t.complex.d.to_full();
            let ds = t.complex.ds.to_full();
            for (op, diff) in [(&h, &d), (&hs, &ds)] {
                let scale = op.frobenius_norm().max(1.0);
                let sq = op.matmul(op).frobenius_norm();
                let anti = (&diff.matmul(op) + &op.matmul(diff)).frobenius_norm();
                flux_worst = flux_worst.max(sq.max(anti) / (scale * scale));
                operators += 1;
            }
        }
    }
    // conjugation families: exp(v beta) d exp(-v beta) stays square zero
    for seed in 0..10u64 {
        let c = acyclic_base(seed);
        let beta = random_even(c.n0, c.n1, 0.5, seed);
        let f = ConjugationFamily::new(ConjugationKind::Flux, c, beta, tol().rank_tol).unwrap();
        for v in [-0.5, 0.3, 1.0] {
            let cv = f.complex_at(v).unwrap();
            let rep = validate(&cv, 1e-11);
            let worst = rep
                .residuals
                .iter()
                .map(|x| x.residual / (x.bound / 1e-11))
                .fold(0.0, f64::max);
            flux_worst = flux_worst.max(worst);
            operators += 1;
        }
    }
    verdict(
        gamma_worst <= 1e-12 && flux_worst <= 1e-11,
        format!("Gamma^2 - I max {gamma_worst:.2e} over m <= 6 (tol 1e-12); {operators} flux operators, max scaled residual {flux_worst:.2e} (tol 1e-11)"),
    )
}

fn same_bits(a: &CMatrix, b: &CMatrix) -> bool {
    a.rows() == b.rows()
        && a.cols() == b.cols()
        && a.as_slice()
            .iter()
            .zip(b.as_slice())
            .all(|(x, y)| x.re.to_bits() == y.re.to_bits() && x.im.to_bits() == y.im.to_bits())
}

fn criterion_8() -> Outcome {
    let dir = std::env::temp_dir().join(format!("cmtorsion-acceptance-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let base = dir.join("base.json");
    let base_s = base.to_str().unwrap();
    let runs: Vec<Vec<&str>> = vec![
        vec![
            "--format", "json", "generate", "random", "--dims", "5,4", "--betti", "1,0", "--seed",
            "3",
        ],
        vec![
            "--format",
            "json",
            "generate",
            "torus",
            "--m",
            "4",
            "--flux",
            "123:1.5,234:-0.5",
            "--metric",
            "diag:1,2,3,4",
        ],
        vec!["--format", "json", "torsion", base_s, "--lambda", "0.5,inf"],
        vec![
            "--format",
            "json",
            "--threads",
            "1",
            "sweep",
            base_s,
            "--family",
            "metric",
            "--param",
            "0:0.4:5",
            "--seed",
            "7",
        ],
        vec!["--format", "json", "selftest", "--seeds", "3"],
    ];
    let (code, _) = run_cli(&[
        "generate", "random", "--dims", "4,4", "--betti", "1,1", "--seed", "9", "--out", base_s,
    ]);
    let mut identical = code == 0;
    for args in &runs {
        let (c1, a) = run_cli(args);
        let (c2, b) = run_cli(args);
        identical &= c1 == 0 && c2 == 0 && a == b && !a.is_empty();
    }
    // thread count must not change the report
    let (_, one) = run_cli(&runs[3]);
    let mut four_args = runs[3].clone();
    four_args[3] = "4";
    let (_, four) = run_cli(&four_args);
    identical &= one == four;

    let mut round_trips = 0;
    let mut exact = true;
    for seed in 0..40u64 {
        let mut r = rng(800 + seed);
        let dims = (r.gen_range(0..=6), r.gen_range(0..=6));
        let c = BiComplex::new(
            rand_matrix(&mut r, dims.1, dims.0).scale_real(r.gen_range(1e-300..1e300)),
            rand_matrix(&mut r, dims.0, dims.1).scale_real(1.0 / 3.0),
            rand_matrix(&mut r, dims.1, dims.0).scale_real(1e-310),
            rand_matrix(&mut r, dims.0, dims.1).scale_real(PI),
        )
        .unwrap();
        let doc = ComplexDocument::from_complex(&c, Default::default());
        let text = doc.to_text();
        let back = ComplexDocument::parse(&text).unwrap();
        let c2 = back.complex().unwrap();
        exact &= [
            (&c.d.eo, &c2.d.eo),
            (&c.d.oe, &c2.d.oe),
            (&c.ds.eo, &c2.ds.eo),
            (&c.ds.oe, &c2.ds.oe),
        ]
        .iter()
        .all(|(a, b)| same_bits(a, b));
        exact &= back.to_text() == text;
        round_trips += 1;
    }
    let _ = std::fs::remove_dir_all(&dir);
    verdict(
        identical && exact,
        format!(
            "{} report commands repeated byte-identically: {identical}; thread count 1 vs 4 identical; \
             {round_trips} document round trips bit-exact: {exact}",
            runs.len()
        ),
    )
}

fn main() -> ExitCode {
    let strict = std::env::args().any(|a| a == "--strict");
    let criteria: [(&str, &str, fn() -> Outcome); 9] = [
        ("1", "acyclic oracle equivalence", criterion_1),
        ("2", "lambda independence", criterion_2),
        ("3", "sign suite and choice independence", criterion_3),
        ("4", "Agmon determinant", criterion_4),
        ("5a", "metric variation law", criterion_5a),
        ("5b", "flux variation law", criterion_5b),
        ("6", "odd-dimension metric independence", criterion_6),
        ("7", "chirality and flux identities", criterion_7),
        ("8", "determinism and round trip", criterion_8),
    ];
    let mut failed = false;
    for (id, title, run) in criteria {
        let start = Instant::now();
        let outcome = run();
        let secs = start.elapsed().as_secs_f64();
        let label = match outcome.status {
            Status::Pass => "PASS",
            Status::Fail => "FAIL",
            Status::KnownFail => "FAIL (known divergence, see README)",
        };
        println!(
            "criterion {id:<2} {label}: {title}: {} [{secs:.1}s]",
            outcome.detail
        );
        failed |= outcome.status == Status::Fail || (strict && outcome.status == Status::KnownFail);
    }
    if failed {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
