//! Unitary and skew-Hermitian connectors, and pair factorization on a curve.

use pencil_gauge::decomp::{connector_skew, connector_unitary, pair_factorize, vandermonde, SkewMode};
use pencil_gauge::numkern::{c, frob, herm_eig, random, unitarity_defect, CMat};
use pencil_gauge::pencil::{standard_pencil, Family};
use pencil_gauge::region::{make_curve, CurveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);

    // U U^H = V V^H  =>  U = V L with L unitary.
    let v = random::gaussian(4, 6, &mut rng);
    let u = &v * random::unitary(6, &mut rng);
    let l = connector_unitary(&u, &v).unwrap();
    println!("unitary: residual {:.2e}, unitarity defect {:.2e}", frob(&(&u - &v * &l)), unitarity_defect(&l));

    // U V^H + V U^H = 0 and U U^H <= V V^H  =>  U = V L, L skew-Hermitian contraction.
    let v = random::gaussian(5, 4, &mut rng);
    let h = random::hermitian(4, &mut rng);
    let r = herm_eig(&h).unwrap().lambda.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let u = &v * (&h * c(0.0, 0.8 / r));
    let l = connector_skew(&u, &v, SkewMode::Contraction).unwrap();
    println!("skew: residual {:.2e}, skewness {:.2e}", frob(&(&u - &v * &l)), frob(&(&l + l.adjoint())));

    // (F Y, G Y) for Vandermonde columns Y factor through points on the circle.
    let n = 6;
    let pen = standard_pencil(&Family::Toeplitz { n }).unwrap();
    let circle = make_curve(CurveKind::UnitCircle).unwrap();
    let y = CMat::from_columns(&[vandermonde(n, 0.4), vandermonde(n, -2.0), vandermonde(n, 1.7)]);
    let pf = pair_factorize(&(&pen.f * &y), &(&pen.g * &y), &circle).unwrap();
    let (ru, rv) = pf.residuals(&(&pen.f * &y), &(&pen.g * &y));
    let mut ws: Vec<f64> = pf.points().unwrap().iter().map(|p| p.omega()).collect();
    ws.sort_by(f64::total_cmp);
    println!("pair factorization: residuals {ru:.2e} {rv:.2e}, points {ws:.6?}");
}
