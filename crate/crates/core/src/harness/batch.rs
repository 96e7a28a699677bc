use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::sim::{run_simulation, RunResult};
use super::stats::median;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRun {
    pub index: usize,
    pub seed: u64,
    /// Failed runs keep their error message; the batch carries on.
    pub outcome: std::result::Result<RunResult, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchSummary {
    pub runs: usize,
    pub failures: usize,
    pub converged: usize,
    pub welfare_min: f64,
    pub welfare_median: f64,
    pub welfare_max: f64,
    pub mean_sender_payoff: f64,
    pub mean_receiver_payoff: f64,
    /// Run index whose final welfare is the (lower) median.
    pub median_run: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BatchResult {
    pub runs: Vec<BatchRun>,
    pub summary: BatchSummary,
}

impl BatchResult {
    pub fn successes(&self) -> impl Iterator<Item = &RunResult> {
        self.runs.iter().filter_map(|r| r.outcome.as_ref().ok())
    }

    pub fn welfare(&self) -> Vec<f64> {
        self.successes().map(|r| r.welfare).collect()
    }
}

pub fn batch_seed(base: u64, index: usize) -> u64 {
    base.wrapping_add(index as u64)
}

/// `runs` independent simulations with seeds `cfg.seed + i` on `parallelism`
/// worker threads. Results come back in seed order whatever the thread count.
pub fn run_batch(cfg: &ExperimentConfig, runs: usize, parallelism: usize) -> Result<BatchResult> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let out: Vec<BatchRun> = pool.install(|| {
        (0..runs)
            .into_par_iter()
            .map(|index| {
                let seed = batch_seed(cfg.seed, index);
                let outcome = run_simulation(cfg, seed).map_err(|e| e.to_string());
                if let Err(e) = &outcome {
                    log::warn!("run {index} (seed {seed}) failed: {e}");
                }
                BatchRun { index, seed, outcome }
            })
            .collect()
    });
    let summary = summarize(&out);
    Ok(BatchResult { runs: out, summary })
}

pub fn summarize(runs: &[BatchRun]) -> BatchSummary {
    let ok: Vec<(usize, &RunResult)> = runs.iter().filter_map(|r| r.outcome.as_ref().ok().map(|v| (r.index, v))).collect();
    let n = ok.len() as f64;
    let welfare: Vec<f64> = ok.iter().map(|(_, r)| r.welfare).collect();
    let mut order: Vec<(f64, usize)> = ok.iter().map(|(i, r)| (r.welfare, *i)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let median_run = (!order.is_empty()).then(|| order[(order.len() - 1) / 2].1);
    BatchSummary {
        runs: runs.len(),
        failures: runs.len() - ok.len(),
        converged: ok.iter().filter(|(_, r)| r.converged).count(),
        welfare_min: welfare.iter().copied().fold(f64::NAN, f64::min),
        welfare_median: median(&welfare).unwrap_or(f64::NAN),
        welfare_max: welfare.iter().copied().fold(f64::NAN, f64::max),
        mean_sender_payoff: ok.iter().map(|(_, r)| r.sender_payoff).sum::<f64>() / n,
        mean_receiver_payoff: ok.iter().map(|(_, r)| r.receiver_payoff).sum::<f64>() / n,
        median_run,
    }
}
