//! Shared fixtures for the benchmarks.

use qvelab_core::{critical_delta, two_block, ModelSpec};

/// Models of increasing dimension used across the benchmark groups.
pub fn fixtures() -> Vec<(&'static str, ModelSpec)> {
    let lambda = 3.0;
    vec![
        ("semicircle_8", ModelSpec::semicircle(8).expect("valid model")),
        ("two_block_cusp_64", two_block(lambda, critical_delta(lambda), 64).expect("valid model")),
        ("two_block_gap_256", two_block(lambda, 0.5 * critical_delta(lambda), 256).expect("valid model")),
    ]
}
