//! Seeded simulation runs, convergence and cycle tracking, parallel batches and
//! the summary reports built on them.

mod batch;
mod config;
mod convergence;
mod cycles;
mod ode;
mod reports;
mod sim;
mod stats;

pub use batch::{batch_seed, run_batch, summarize, BatchResult, BatchRun, BatchSummary};
pub use config::{
    apply_override, resolve_seed, AlphaKind, ConvergenceConfig, CycleConfig, ExperimentConfig, InitConfig, InitKind,
    NoiseConfig, OdeConfig, OdeVariantKind, ReceiverConfig, ReceiverKind, ScheduleConfig, SEED_ENV,
};
pub use convergence::{detect_convergence, ConvergenceMonitor};
pub use cycles::{track_cycles, CycleSummary, CycleTracker};
pub use ode::{analyze_start, ode_starts, ode_system, return_check, run_ode_analysis, OdeRun, ReturnCheck};
pub use reports::{
    decay_sweep, histogram, payoff_ratio, payoff_ratio_report, ratio_rows, rescale_series, Histogram, HistogramBin,
    RatioRow, Role, SweepRow, RATIO_GUARD,
};
pub use sim::{run_simulation, RunResult, Simulation};
pub use stats::{mann_whitney, median, RankTest};
