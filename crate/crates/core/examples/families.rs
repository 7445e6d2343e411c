//! Decomposition for several pencil families on full curves and segments.

use pencil_gauge::decomp::decompose_psd;
use pencil_gauge::numkern::{frob, CMat};
use pencil_gauge::pencil::{atom_basis, random_curve_point, standard_pencil, AtomSet, Family};
use pencil_gauge::region::{contains, make_curve, CurveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

fn main() {
    let cases = [
        (Family::HankelPowers { n: 8 }, CurveKind::RealInterval { a: -1.0, b: 1.5 }),
        (Family::Cosine { n: 8 }, CurveKind::UnitCircle),
        (Family::Legendre { n: 7 }, CurveKind::RealInterval { a: -1.0, b: 1.0 }),
        (Family::VectorPoly { k: 4, l: 2 }, CurveKind::RealAxis),
        (Family::Toeplitz { n: 10 }, CurveKind::UnitCircleArc { a: 0.0, b: PI / 6.0 }),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (fam, kind) in cases {
        let aset = AtomSet::new(standard_pencil(&fam).unwrap(), make_curve(kind).unwrap()).unwrap();
        let n = aset.n();
        let mut x = CMat::zeros(n, n);
        for _ in 0..2 {
            let p = random_curve_point(&aset.curve, &mut rng).unwrap();
            let b = atom_basis(&aset, &p, 1e-8).unwrap();
            x += &b * b.adjoint();
        }
        let d = decompose_psd(&x, &aset, 1e-9).unwrap();
        let on_curve = d.points.iter().all(|p| contains(&aset.curve, p, 1e-6));
        println!("{fam:?} on {kind:?}: {} atoms, relative residual {:.1e}, on curve {on_curve}", d.len(), d.residual / frob(&x));
    }
}
