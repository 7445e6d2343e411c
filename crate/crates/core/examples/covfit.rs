//! Covariance fitting for line spectra from noisy snapshots.

use pencil_gauge::apps::{covfit, sample_covariance, synth_signal, LineSpectrumModel};
use pencil_gauge::conic::Settings;
use pencil_gauge::numkern::c;

fn main() {
    let model = LineSpectrumModel {
        omegas: vec![-1.3, 0.4, 1.6],
        coeffs: vec![c(4.0, 0.0), c(0.0, 3.0), c(-2.5, 0.0)],
        sigma: 8.0,
    };
    let y = synth_signal(&model, 150, None, 0).unwrap();
    let r = sample_covariance(&y, 32).unwrap();
    let mut res = covfit(&r, 0.25, &Settings::default()).unwrap();
    res.score(&model.omegas, 0.05);
    println!("noise estimate {:.3}, matched {} of 3 lines", res.noise_estimate.unwrap_or(f64::NAN), res.matched.len());
    for k in res.dominant(3) {
        println!("omega {:+.4}  magnitude {:.4}", res.estimated.omegas[k], res.estimated.magnitudes[k]);
    }
}
