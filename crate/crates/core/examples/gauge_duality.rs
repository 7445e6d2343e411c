//! Denoising a PSD Toeplitz matrix with a squared Frobenius loss, and
//! verifying the dual certificate on a curve grid.

use pencil_gauge::conic::Settings;
use pencil_gauge::decomp::{decompose_psd, vandermonde};
use pencil_gauge::gauge::{build_symmetric, certificate_check, extract_certificate, gauge_value, LossSpec};
use pencil_gauge::numkern::{c, eye, random, CMat};
use pencil_gauge::pencil::{standard_pencil, AtomSet, Family};
use pencil_gauge::region::{make_curve, CurveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let n = 10;
    let e = eye(n) / c((n as f64).sqrt(), 0.0);
    let pen = standard_pencil(&Family::Toeplitz { n }).unwrap().with_e(e).unwrap();
    let aset = AtomSet::new(pen, make_curve(CurveKind::UnitCircle).unwrap()).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut target = random::hermitian(n, &mut rng) * c(0.05, 0.0);
    for (w, p) in [(0.6, 2.0), (-1.8, 1.0)] {
        let a = vandermonde(n, w);
        target += &a * a.adjoint() * c(p, 0.0);
    }
    let loss = LossSpec::SquaredFrobenius { target, gamma: 0.5 };
    let prog = build_symmetric(&aset, &loss, false).unwrap();
    let sol = prog.solve(&Settings::default()).unwrap();
    println!("status {:?}: primal {:.8}, dual {:.8}", sol.status, sol.primal_obj, sol.dual_obj);

    let x: CMat = prog.x_blocks(&sol)[0].clone();
    println!("gauge of the estimate {:.6}", gauge_value(&x, &aset, 1e-6));
    let cert = extract_certificate(&prog, &sol).unwrap();
    let rep = certificate_check(&cert, &aset, 512).unwrap();
    println!("certificate max violation {:.2e} over 512 points", rep.max_violation);
    let d = decompose_psd(&x, &aset, 1e-6).unwrap();
    println!("estimate decomposes into {} atoms at {:.4?}", d.len(), d.omegas());
}
