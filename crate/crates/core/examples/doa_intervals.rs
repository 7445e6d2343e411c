//! Direction finding from two sensor groups with sector constraints, compared
//! against the unconstrained program on the same measurements.

use pencil_gauge::apps::{doa_instance, doa_intervals, exact_recovery, RateConfig};
use pencil_gauge::conic::Settings;
use std::f64::consts::PI;

fn main() {
    let cfg = RateConfig {
        n: 50,
        sources: vec![-1.1, -0.7, -0.3, 0.05, 0.4, 0.75, 1.2],
        measurement_counts: vec![30],
        trials: 1,
        with_intervals: true,
        alpha: PI,
    };
    let (mut prob, truth) = doa_instance(&cfg, 30, 0).unwrap();
    for constrained in [true, false] {
        prob.constrained = constrained;
        let res = doa_intervals(&prob, &Settings::default()).unwrap();
        let thetas = res.estimated.thetas.clone().unwrap_or_default();
        println!("constrained {constrained}: {} atoms, exact {}", thetas.len(), exact_recovery(&res, &truth, 1e-3));
    }
}
