use pencil_gauge::numkern::{c, frob, herm_eig, random, unitarity_defect, CMat, C64};
use pencil_gauge::pencil::{atom_basis, lmi_maps, random_curve_point, standard_pencil, AtomSet, Family};
use pencil_gauge::region::{make_curve, CurveKind};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn family_and_curve(k: usize, n: usize) -> (Family, CurveKind) {
    match k {
        0 => (Family::Toeplitz { n }, CurveKind::UnitCircle),
        1 => (Family::Toeplitz { n }, CurveKind::UnitCircleArc { a: 0.4, b: 0.9 }),
        2 => (Family::HankelPowers { n }, CurveKind::RealAxis),
        3 => (Family::HankelPowers { n }, CurveKind::RealInterval { a: -1.0, b: 2.0 }),
        4 => (Family::Cosine { n }, CurveKind::RealInterval { a: -1.0, b: 1.0 }),
        5 => (Family::Legendre { n }, CurveKind::RealAxis),
        _ => (Family::VectorPoly { k: n.div_ceil(2).max(2), l: 2 }, CurveKind::UnitCircle),
    }
}

/// Diagonal averages: the nearest Hermitian Toeplitz matrix.
fn toeplitz_part(x: &CMat) -> CMat {
    let n = x.nrows();
    let d: Vec<C64> = (0..n).map(|k| (0..n - k).map(|i| x[(i + k, i)]).sum::<C64>() / c((n - k) as f64, 0.0)).collect();
    CMat::from_fn(n, n, |i, j| if i >= j { d[i - j] } else { d[j - i].conj() })
}

/// Anti-diagonal averages of the real part: the nearest real Hankel matrix.
fn hankel_part(x: &CMat) -> CMat {
    let n = x.nrows();
    let h: Vec<f64> = (0..2 * n - 1)
        .map(|s| {
            let cells: Vec<f64> = (0..n).filter(|&i| s >= i && s - i < n).map(|i| x[(i, s - i)].re).collect();
            cells.iter().sum::<f64>() / cells.len() as f64
        })
        .collect();
    CMat::from_fn(n, n, |i, j| c(h[i + j], 0.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn atom_basis_spans_pencil_nullspace(seed in any::<u64>(), k in 0usize..7, n in 3usize..9) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let (fam, kind) = family_and_curve(k, n);
        let aset = AtomSet::new(standard_pencil(&fam).unwrap(), make_curve(kind).unwrap()).unwrap();
        let p = random_curve_point(&aset.curve, &mut g).unwrap();
        let b = atom_basis(&aset, &p, 1e-8).unwrap();
        prop_assert_eq!(b.ncols(), aset.n() - aset.p());
        prop_assert!(unitarity_defect(&(b.adjoint() * &b)) <= 1e-10 || b.ncols() == 0);
        prop_assert!(frob(&(aset.pencil.eval(p.mu, p.nu) * &b)) <= 1e-10);
        let a = &b * random::gaussian(b.ncols(), 1, &mut g);
        let x = &a * a.adjoint();
        let (eq, ineq) = lmi_maps(&aset.pencil, &aset.curve, &x).unwrap();
        let sc = 1.0 + frob(&x);
        prop_assert!(frob(&eq) <= 1e-10 * sc);
        if aset.curve.inequality_active {
            prop_assert!(herm_eig(&ineq).unwrap().lambda[0] <= 1e-10 * sc);
        }
    }

    #[test]
    fn toeplitz_equality_iff_toeplitz(seed in any::<u64>(), n in 2usize..9) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let aset = AtomSet::new(standard_pencil(&Family::Toeplitz { n }).unwrap(), make_curve(CurveKind::UnitCircle).unwrap()).unwrap();
        let x = random::hermitian(n, &mut g);
        let t = toeplitz_part(&x);
        prop_assert!(frob(&lmi_maps(&aset.pencil, &aset.curve, &t).unwrap().0) <= 1e-12);
        let dist = frob(&(&x - &t));
        let eq = frob(&lmi_maps(&aset.pencil, &aset.curve, &x).unwrap().0);
        prop_assert!(dist <= 1e-12 || eq >= 1e-3 * dist, "dist {} eq {}", dist, eq);
    }

    #[test]
    fn hankel_equality_iff_real_hankel(seed in any::<u64>(), n in 2usize..9) {
        let mut g = ChaCha8Rng::seed_from_u64(seed);
        let aset = AtomSet::new(standard_pencil(&Family::HankelPowers { n }).unwrap(), make_curve(CurveKind::RealAxis).unwrap()).unwrap();
        let x = random::hermitian(n, &mut g);
        let h = hankel_part(&x);
        prop_assert!(frob(&lmi_maps(&aset.pencil, &aset.curve, &h).unwrap().0) <= 1e-12);
        let dist = frob(&(&x - &h));
        let eq = frob(&lmi_maps(&aset.pencil, &aset.curve, &x).unwrap().0);
        prop_assert!(dist <= 1e-12 || eq >= 1e-3 * dist, "dist {} eq {}", dist, eq);
    }
}
