//! Certifying a bound on a transfer function over the unit circle.

use pencil_gauge::gauge::kyp_bound_check;
use pencil_gauge::numkern::{c, CMat};
use pencil_gauge::region::{make_curve, CurveKind};

fn main() {
    let circle = make_curve(CurveKind::UnitCircle).unwrap();
    let a = CMat::from_row_slice(2, 2, &[c(0.5, 0.0), c(0.2, 0.0), c(0.0, 0.0), c(-0.3, 0.0)]);
    let b = CMat::from_row_slice(2, 1, &[c(1.0, 0.0), c(0.5, 0.0)]);
    let cm = CMat::from_row_slice(1, 2, &[c(1.0, 0.0), c(-0.4, 0.0)]);
    let d = CMat::from_row_slice(1, 1, &[c(0.1, 0.0)]);
    let peak = kyp_bound_check(&a, &b, &cm, &d, &circle, 512).unwrap().worst.1;
    println!("peak gain on the grid {peak:.6}");
    for s in [0.9 / peak, 1.1 / peak] {
        let r = kyp_bound_check(&a, &b, &(&cm * c(s, 0.0)), &(&d * c(s, 0.0)), &circle, 512).unwrap();
        println!("scale {s:.4}: bound holds {}, margin {:.3e}", r.holds, r.margin);
    }
}
