//! Shared fixtures for the criterion benchmarks.

use seirv_core::{Scenario, SweepConfig};

/// Published parameters at the given efficacy pair and horizon, with a fixed
/// iteration budget so timings compare like with like.
pub fn fixture(theta1: f64, theta2: f64, horizon: f64, iterations: usize) -> Scenario {
    let mut s = Scenario::paper(theta1, theta2, horizon).expect("valid fixture");
    s.sweep = SweepConfig {
        max_iterations: iterations,
        convergence_tol: 1e-12,
        ..SweepConfig::default()
    };
    s
}
