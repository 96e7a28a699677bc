//! Shared fixtures for the benchmarks.

use cheaptalk::harness::ExperimentConfig;

/// Default experiment on `k` states with bias `b`.
pub fn config(k: usize, b: f64) -> ExperimentConfig {
    ExperimentConfig { k, b, ..ExperimentConfig::default() }
}
