//! Multiple-snapshot direction finding on a sparse array and its dual polynomial.

use pencil_gauge::apps::{doa_mmv, exact_recovery, mmv_dual_polynomial, mmv_instance, MmvConfig};
use pencil_gauge::conic::Settings;
use std::f64::consts::FRAC_PI_4;

fn main() {
    let cfg = MmvConfig {
        n: 30,
        sensors: 7,
        sources: vec![-0.5, 0.1, 0.6],
        magnitudes: vec![1.0; 3],
        alpha: 2.0,
        theta_c: FRAC_PI_4,
        snapshots: vec![1, 15, 30],
        trials: 1,
        noise: 0.0,
    };
    for &m in &cfg.snapshots {
        let (idx, b) = mmv_instance(&cfg, m, 2).unwrap();
        let res = doa_mmv(&b, &idx, cfg.theta_c, cfg.alpha, cfg.n, &Settings::default()).unwrap();
        let peaks = mmv_dual_polynomial(&res, cfg.n, &res.estimated.omegas).unwrap();
        println!(
            "m = {m:2}: thetas {:.4?}, exact {}, dual polynomial at atoms {:.6?}",
            res.estimated.thetas.clone().unwrap_or_default(),
            exact_recovery(&res, &cfg.sources, 1e-3),
            peaks
        );
    }
}
