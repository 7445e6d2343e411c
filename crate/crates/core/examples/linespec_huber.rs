//! Robust line-spectrum estimation on an arc with sparse corruptions, using
//! both the vector and the Hankel-matrix formulations.

use pencil_gauge::apps::{linespec_huber, synth_signal, Corruption, HuberVariant, LineSpectrumModel};
use pencil_gauge::conic::Settings;
use pencil_gauge::numkern::c;
use std::f64::consts::FRAC_PI_6;

fn main() {
    let model = LineSpectrumModel {
        omegas: vec![-0.51, 0.0, 0.51],
        coeffs: vec![c(2.0, 0.0), c(1.0, 1.0), c(-1.0, 0.5)],
        sigma: 0.2,
    };
    let y = synth_signal(&model, 50, Some(Corruption { count: 20, magnitude: 3.0 }), 4).unwrap();
    let st = Settings::default();
    let mut vec_res = linespec_huber(&y, 0.071, 1.0, FRAC_PI_6, HuberVariant::Vector, &st).unwrap();
    let hank = linespec_huber(&y, 0.071, 1.0, FRAC_PI_6, HuberVariant::HankelMatrix { n1: 25, n2: 26 }, &st).unwrap();
    vec_res.score(&model.omegas, 0.02);
    println!("objectives: vector {:.6}, hankel {:.6}", vec_res.objective, hank.objective);
    let dy = vec_res.signal.as_ref().unwrap().iter().zip(hank.signal.as_ref().unwrap()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    println!("max |y_vector - y_hankel| = {dy:.2e}");
    for k in vec_res.dominant(3) {
        println!("omega {:+.4}  magnitude {:.4}", vec_res.estimated.omegas[k], vec_res.estimated.magnitudes[k]);
    }
}
