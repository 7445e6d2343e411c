//! Vandermonde decomposition of a PSD Toeplitz matrix.

use pencil_gauge::decomp::{caratheodory_toeplitz, vandermonde};
use pencil_gauge::numkern::{c, frob, CMat};

fn main() {
    let n = 16;
    let lines = [(-2.4, 1.0), (-0.3, 2.5), (0.9, 0.7), (2.8, 1.6)];
    let mut x = CMat::zeros(n, n);
    for &(w, p) in &lines {
        let a = vandermonde(n, w);
        x += &a * a.adjoint() * c(p, 0.0);
    }
    let d = caratheodory_toeplitz(&x).expect("PSD Toeplitz input");
    println!("rank {} (expected {}), relative residual {:.2e}", d.len(), lines.len(), d.residual / frob(&x));
    let mut found: Vec<(f64, f64)> = d.points.iter().map(|p| p.omega()).zip(d.weights.iter().map(|w| w / n as f64)).collect();
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    for (w, p) in found {
        println!("omega {w:+.9}  power {p:.9}");
    }
}
