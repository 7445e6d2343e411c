//! The non-symmetric program over free blocks computes the nuclear norm.

use pencil_gauge::conic::Settings;
use pencil_gauge::gauge::{build_nonsymmetric, LossSpec};
use pencil_gauge::numkern::{eye, random, svd, CMat};
use pencil_gauge::pencil::{AtomSet, PencilSpec};
use pencil_gauge::region::{make_curve, CurveKind};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let (n1, n2) = (8, 6);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let y = random::gaussian(n1, n2, &mut rng);
    let pen = PencilSpec::two_block(
        (CMat::zeros(0, n1), CMat::zeros(0, n1), eye(n1)),
        (CMat::zeros(0, n2), CMat::zeros(0, n2), eye(n2)),
    )
    .unwrap();
    let aset = AtomSet::new(pen, make_curve(CurveKind::UnitCircle).unwrap()).unwrap();
    let indices: Vec<(usize, usize)> = (0..n1).flat_map(|i| (0..n2).map(move |j| (i, j))).collect();
    let values = indices.iter().map(|&(i, j)| y[(i, j)]).collect();
    let prog = build_nonsymmetric(&aset, &LossSpec::EqualityOnIndexSet { indices, values }).unwrap();
    let sol = prog.solve(&Settings::default()).unwrap();
    let nuc: f64 = svd(&y).unwrap().sigma.iter().sum();
    println!("program {:.9}  sum of singular values {nuc:.9}", sol.primal_obj);
}
