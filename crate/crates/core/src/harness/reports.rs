use std::fmt;

use super::batch::run_batch;
use super::config::ExperimentConfig;
use crate::equilibria::{best_pbe, PbeEntry};
use crate::error::{Error, Result};

/// Below this magnitude the equilibrium payoff is too small to divide by.
pub const RATIO_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct HistogramBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bins: Vec<HistogramBin>,
    pub below: usize,
    pub above: usize,
}

/// Equal-width bins on `[lo, hi]`; the top edge belongs to the last bin.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> Result<Histogram> {
    if bins == 0 || !(hi > lo) {
        return Err(Error::Config(format!("histogram needs bins > 0 and lo < hi, got {bins} bins on [{lo}, {hi}]")));
    }
    let width = (hi - lo) / bins as f64;
    let mut out: Vec<HistogramBin> = (0..bins)
        .map(|i| HistogramBin { lo: lo + i as f64 * width, hi: if i + 1 == bins { hi } else { lo + (i + 1) as f64 * width }, count: 0 })
        .collect();
    let (mut below, mut above) = (0, 0);
    for &v in values {
        if v < lo {
            below += 1;
        } else if v > hi {
            above += 1;
        } else {
            let i = (((v - lo) / width) as usize).min(bins - 1);
            out[i].count += 1;
        }
    }
    Ok(Histogram { bins: out, below, above })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Sender,
    Receiver,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Sender => "sender",
            Role::Receiver => "receiver",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioRow {
    pub b: f64,
    pub role: Role,
    pub learned: f64,
    pub equilibrium: f64,
    /// `(U - U_CS) / |U_CS|`, or the plain difference when `absolute`.
    pub ratio: f64,
    pub absolute: bool,
}

/// `D = (U - U_CS) / |U_CS|`, falling back to `U - U_CS` when `|U_CS|` is negligible.
pub fn payoff_ratio(learned: f64, equilibrium: f64) -> (f64, bool) {
    if equilibrium.abs() < RATIO_GUARD {
        (learned - equilibrium, true)
    } else {
        ((learned - equilibrium) / equilibrium.abs(), false)
    }
}

pub fn ratio_rows(b: f64, sender: f64, receiver: f64, best: &PbeEntry) -> [RatioRow; 2] {
    let (rs, abs_s) = payoff_ratio(sender, best.sender_payoff);
    let (rr, abs_r) = payoff_ratio(receiver, best.receiver_payoff);
    [
        RatioRow { b, role: Role::Sender, learned: sender, equilibrium: best.sender_payoff, ratio: rs, absolute: abs_s },
        RatioRow { b, role: Role::Receiver, learned: receiver, equilibrium: best.receiver_payoff, ratio: rr, absolute: abs_r },
    ]
}

/// Batch-average final payoffs per configuration against the sender-best
/// connected-pool equilibrium at exploration `pbe_epsilon`.
pub fn payoff_ratio_report(cfgs: &[ExperimentConfig], parallelism: usize, pbe_epsilon: f64) -> Result<Vec<RatioRow>> {
    let mut rows = Vec::with_capacity(2 * cfgs.len());
    for cfg in cfgs {
        let batch = run_batch(cfg, cfg.runs, parallelism)?;
        let best = best_pbe(cfg.k, cfg.bias()?, pbe_epsilon)?;
        let s = &batch.summary;
        rows.extend(ratio_rows(cfg.b, s.mean_sender_payoff, s.mean_receiver_payoff, &best));
    }
    Ok(rows)
}

/// Min-max rescaling to `[0, 1]`; a flat series maps to zeros.
pub fn rescale_series(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.0; values.len()];
    }
    values.iter().map(|v| (v - lo) / (hi - lo)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub b: f64,
    pub payoff: f64,
    pub rescaled: f64,
}

/// Average final sender payoff for every `(gamma, b)` pair, each bias series
/// rescaled across the `gamma` axis.
pub fn decay_sweep(gammas: &[f64], biases: &[f64], cfg: &ExperimentConfig, parallelism: usize) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::with_capacity(gammas.len() * biases.len());
    for &b in biases {
        let mut payoffs = Vec::with_capacity(gammas.len());
        for &gamma in gammas {
            let mut c = cfg.clone();
            c.b = b;
            c.schedules.gamma = gamma;
            payoffs.push(run_batch(&c, c.runs, parallelism)?.summary.mean_sender_payoff);
        }
        for ((&gamma, &payoff), rescaled) in gammas.iter().zip(&payoffs).zip(rescale_series(&payoffs)) {
            rows.push(SweepRow { gamma, b, payoff, rescaled });
        }
    }
    Ok(rows)
}
