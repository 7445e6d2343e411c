use pencil_gauge::decomp::{
    caratheodory_toeplitz, connector_skew, connector_unitary, decompose_psd, pair_factorize, vandermonde, SkewMode,
};
use pencil_gauge::numkern::{c, diag_c, frob, herm_eig, random, unitarity_defect, CMat, C64};
use pencil_gauge::pencil::{atom_basis, random_curve_point, standard_pencil, AtomSet, Family};
use pencil_gauge::region::{contains, make_curve, CurveKind, CurveSpec, HomPoint};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn aset_for(k: usize, n: usize) -> AtomSet {
    let (fam, kind) = match k {
        0 => (Family::Toeplitz { n }, CurveKind::UnitCircle),
        1 => (Family::Toeplitz { n }, CurveKind::UnitCircleArc { a: -0.5, b: 1.0 }),
        2 => (Family::HankelPowers { n }, CurveKind::RealAxis),
        3 => (Family::Cosine { n }, CurveKind::RealInterval { a: -1.0, b: 1.0 }),
        _ => (Family::Legendre { n }, CurveKind::RealInterval { a: -0.5, b: 0.5 }),
    };
    AtomSet::new(standard_pencil(&fam).unwrap(), make_curve(kind).unwrap()).unwrap()
}

/// Points spread over the curve so atoms stay well separated.
fn spread_points(curve: &CurveSpec, r: usize, g: &mut ChaCha8Rng) -> Vec<HomPoint> {
    let mut pts: Vec<HomPoint> = Vec::new();
    while pts.len() < r {
        let p = random_curve_point(curve, g).unwrap();
        if pts.iter().all(|q| q.dist(&p) > 0.1) {
            pts.push(p);
        }
    }
    pts
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn decomposition_round_trip(seed in any::<u64>(), k in 0usize..5, n in 4usize..9, r in 1usize..4) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let aset = aset_for(k, n);
        let r = r.min(n - 2);
        let pts = spread_points(&aset.curve, r, &mut g);
        let mut x = CMat::zeros(n, n);
        for p in &pts {
            let b = atom_basis(&aset, p, 1e-8).unwrap();
            let a = &b * c(g.random_range(0.5..2.0), 0.0);
            x += &a * a.adjoint();
        }
        let d = decompose_psd(&x, &aset, 1e-9).unwrap();
        prop_assert_eq!(d.len(), r);
        prop_assert!(frob(&(d.reconstruct(n) - &x)) <= 1e-7 * (1.0 + frob(&x)));
        for (a, p) in d.atoms.iter().zip(&d.points) {
            prop_assert!(contains(&aset.curve, p, 1e-6));
            prop_assert!((aset.pencil.eval(p.mu, p.nu) * a).norm() <= 1e-6 * (1.0 + a.norm()));
        }
        for p in &pts {
            prop_assert!(d.points.iter().any(|q| q.dist(p) <= 1e-6));
        }
    }

    #[test]
    fn pair_factorize_points_on_curve(seed in any::<u64>(), k in 0usize..5, r in 1usize..5, extra in 0usize..3) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let aset = aset_for(k, 4);
        let pts: Vec<HomPoint> = (0..r).map(|_| random_curve_point(&aset.curve, &mut g).unwrap()).collect();
        let w = random::gaussian(r + extra, r, &mut g);
        let q = random::unitary(r, &mut g);
        let mu: Vec<C64> = pts.iter().map(|p| p.mu).collect();
        let nu: Vec<C64> = pts.iter().map(|p| p.nu).collect();
        let u = &w * diag_c(&mu) * q.adjoint();
        let v = &w * diag_c(&nu) * q.adjoint();
        let f = pair_factorize(&u, &v, &aset.curve).unwrap();
        let (ru, rv) = f.residuals(&u, &v);
        let sc = 1.0 + frob(&u) + frob(&v);
        prop_assert!(ru <= 1e-7 * sc && rv <= 1e-7 * sc);
        for p in f.points().unwrap() {
            prop_assert!(contains(&aset.curve, &p, 1e-6));
        }
    }

    #[test]
    fn connector_classes(seed in any::<u64>(), p in 1usize..7, r in 1usize..6) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let v = random::gaussian(p, r, &mut g);
        // Unitary connector.
        let w = random::unitary(r, &mut g);
        let u = &v * &w;
        let l = connector_unitary(&u, &v).unwrap();
        prop_assert!(unitarity_defect(&l) <= 1e-8);
        prop_assert!(frob(&(&u - &v * &l)) <= 1e-8 * (1.0 + frob(&v)));
        // Unitary skew-Hermitian connector.
        let qm = random::unitary(r, &mut g);
        let signs: Vec<C64> = (0..r).map(|_| c(0.0, if g.random_bool(0.5) { 1.0 } else { -1.0 })).collect();
        let lam = &qm * diag_c(&signs) * qm.adjoint();
        let u = &v * &lam;
        let l = connector_skew(&u, &v, SkewMode::Equal).unwrap();
        prop_assert!(frob(&(&l + l.adjoint())) <= 1e-8);
        prop_assert!(unitarity_defect(&l) <= 1e-8);
        prop_assert!(frob(&(&u - &v * &l)) <= 1e-7 * (1.0 + frob(&v)));
        // Skew-Hermitian contraction.
        let d: Vec<C64> = (0..r).map(|_| c(0.0, g.random_range(-1.0..1.0))).collect();
        let lam = &qm * diag_c(&d) * qm.adjoint();
        let u = &v * &lam;
        let l = connector_skew(&u, &v, SkewMode::Contraction).unwrap();
        prop_assert!(frob(&(&l + l.adjoint())) <= 1e-8);
        let h = &l * c(0.0, -1.0);
        let e = herm_eig(&((&h + h.adjoint()) * c(0.5, 0.0))).unwrap();
        prop_assert!(e.lambda.iter().all(|x| x.abs() <= 1.0 + 1e-8));
        prop_assert!(frob(&(&u - &v * &l)) <= 1e-7 * (1.0 + frob(&v)));
    }

    #[test]
    fn caratheodory_agrees_with_general_decomposition(seed in any::<u64>(), n in 4usize..12, r in 1usize..4) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let r = r.min(n / 2 - 1);
        let sep = 2.0 * PI / n as f64;
        let mut omegas: Vec<f64> = Vec::new();
        while omegas.len() < r {
            let w = g.random_range(-PI..PI);
            if omegas.iter().all(|o| pencil_gauge::apps::wrap_dist(*o, w) > sep) {
                omegas.push(w);
            }
        }
        let mut x = CMat::zeros(n, n);
        for w in &omegas {
            let a = vandermonde(n, *w) * c(g.random_range(0.5..2.0), 0.0);
            x += &a * a.adjoint();
        }
        let aset = aset_for(0, n);
        let d1 = caratheodory_toeplitz(&x).unwrap();
        let d2 = decompose_psd(&x, &aset, 1e-9).unwrap();
        prop_assert_eq!(d1.len(), d2.len());
        let mut w1 = d1.omegas();
        let mut w2 = d2.omegas();
        w1.sort_by(f64::total_cmp);
        w2.sort_by(f64::total_cmp);
        for (a, b) in w1.iter().zip(&w2) {
            prop_assert!(pencil_gauge::apps::wrap_dist(*a, *b) <= 1e-7);
        }
        let mut wt1 = d1.weights.clone();
        let mut wt2 = d2.weights.clone();
        wt1.sort_by(f64::total_cmp);
        wt2.sort_by(f64::total_cmp);
        for (a, b) in wt1.iter().zip(&wt2) {
            prop_assert!((a - b).abs() <= 1e-6 * (1.0 + a.abs()));
        }
    }
}
