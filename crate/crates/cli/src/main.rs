use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};
use log::info;

use cheaptalk::dynamics::Classification;
use cheaptalk::equilibria::{enumerate_pure_connected_pbe, worst_case_bound, BoundSearch};
use cheaptalk::harness::{
    decay_sweep, histogram, ode_system, payoff_ratio_report, resolve_seed, run_batch, run_ode_analysis, run_simulation,
    ExperimentConfig, OdeRun, SEED_ENV,
};
use cheaptalk::io::{
    batch_rows, read_runs_csv, write_bound, write_histogram, write_histogram_csv, write_matrix_csv, write_ode_csv, write_pbe,
    write_ratio_csv, write_return_csv, write_run_dir, write_runs_csv, write_sweep_csv, RunRow,
};
use cheaptalk::{Bias, Error};

const CONFIG_FILE: &str = "config.toml";

/// Learning dynamics, equilibria and stability analysis for discretized cheap-talk games.
#[derive(Parser)]
#[command(name = "cheaptalk", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML experiment config; defaults apply to anything it leaves out.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Base seed; beats CHEAPTALK_SEED and the config file.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Worker threads for batches.
    #[arg(long, value_name = "N", default_value_t = 1)]
    parallel: usize,
    /// Replace an existing artifact directory.
    #[arg(long)]
    force: bool,
    /// Config override such as `schedules.tau_floor=1e-4`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// More log output; repeat for more.
    #[arg(short, long, action = ArgAction::Count)]
    verbose: u8,
    #[arg(short, long, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// One seeded run: Q-table, policy, welfare trajectory and cycle average.
    Simulate {
        #[command(flatten)]
        common: Common,
    },
    /// `runs` seeded runs with per-run artifacts, a runs table and a welfare histogram.
    Batch {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 30)]
        bins: usize,
    },
    /// Worst-case welfare bound for one odd K or an odd range.
    Bound {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        k: usize,
        /// Upper end of an odd range starting at `k`.
        #[arg(long)]
        k_max: Option<usize>,
        /// Search asymmetric partitions too (K <= 31).
        #[arg(long)]
        exhaustive: bool,
    },
    /// Pure connected-pool equilibria, best sender payoff first.
    Enumerate {
        #[command(flatten)]
        common: Common,
        #[arg(long, short)]
        k: usize,
        #[arg(long, short, default_value_t = 0.0)]
        b: f64,
        #[arg(long, default_value_t = 0.0)]
        epsilon: f64,
    },
    /// Rest points of the limiting ODE from the configured starts, with stability.
    Ode {
        #[command(flatten)]
        common: Common,
    },
    /// Aggregate tables built from batches.
    Report {
        #[command(subcommand)]
        kind: ReportKind,
    },
}

#[derive(Subcommand)]
enum ReportKind {
    /// Welfare histogram of an existing runs table.
    Histogram {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_name = "CSV")]
        runs: PathBuf,
        #[arg(long, default_value_t = 30)]
        bins: usize,
        #[arg(long)]
        lo: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        hi: f64,
    },
    /// Learned payoffs against the best connected-pool equilibrium for each bias.
    Ratio {
        #[command(flatten)]
        common: Common,
        #[arg(long = "b", value_delimiter = ',', required = true)]
        biases: Vec<f64>,
        /// Exploration used for the equilibrium payoffs; defaults to the config's floor.
        #[arg(long)]
        pbe_epsilon: Option<f64>,
    },
    /// Final sender payoff over a grid of temperature decay rates and biases.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long = "gamma", value_delimiter = ',', required = true)]
        gammas: Vec<f64>,
        #[arg(long = "b", value_delimiter = ',', required = true)]
        biases: Vec<f64>,
    },
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Inadmissible { .. } | Error::NoBracket { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn load_config(common: &Common) -> Result<ExperimentConfig, Failure> {
    let text = match &common.config {
        Some(p) => fs::read_to_string(p).map_err(|e| Failure::Usage(format!("{}: {e}", p.display())))?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::from_toml_with_overrides(&text, &common.overrides)?;
    let env = std::env::var(SEED_ENV).ok();
    cfg.seed = resolve_seed(common.seed, env.as_deref(), cfg.seed)?;
    Ok(cfg)
}

/// Creates `dir`, refusing a non-empty one unless `force` is set. Forcing only
/// clears directories that hold a frozen config, i.e. earlier artifacts.
fn prepare_out(dir: &Path, force: bool) -> Outcome {
    if dir.exists() {
        let populated = fs::read_dir(dir)?.next().is_some();
        if populated {
            if !force {
                return Err(Failure::Usage(format!("{} is not empty; pass --force to replace it", dir.display())));
            }
            if !dir.join(CONFIG_FILE).is_file() {
                return Err(Failure::Usage(format!("{} holds no {CONFIG_FILE}; refusing to clear it", dir.display())));
            }
            fs::remove_dir_all(dir)?;
        }
    }
    fs::create_dir_all(dir)?;
    Ok(())
}

fn artifact_dir(common: &Common, default: &str) -> Result<PathBuf, Failure> {
    let dir = common.out.clone().unwrap_or_else(|| PathBuf::from(default));
    prepare_out(&dir, common.force)?;
    Ok(dir)
}

fn freeze(dir: &Path, cfg: &ExperimentConfig) -> Outcome {
    fs::write(dir.join(CONFIG_FILE), cfg.to_toml())?;
    Ok(())
}

fn simulate(common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let dir = artifact_dir(common, "cheaptalk-simulate")?;
    freeze(&dir, &cfg)?;
    let r = run_simulation(&cfg, cfg.seed)?;
    write_run_dir(&dir, &r)?;
    write_runs_csv(&dir.join("runs.csv"), &[RunRow::from_result(&r)])?;
    println!(
        "seed {} converged={} steps={} welfare={:.6} connected={} msfr={} saps={} -> {}",
        r.seed,
        r.converged,
        r.steps_used,
        r.welfare,
        r.shape.connected,
        r.shape.msfr,
        r.shape.saps,
        dir.display()
    );
    Ok(())
}

/// Histogram floor: the worst-case bound for odd K, widened to cover every run.
fn histogram_floor(k: usize, welfare: &[f64]) -> f64 {
    let bound = if k % 2 == 1 { worst_case_bound(k, BoundSearch::Symmetric).map(|r| r.u_lower_brute).ok() } else { None };
    let lowest = welfare.iter().copied().chain(bound).fold(1.0, f64::min);
    ((lowest * 100.0).floor() / 100.0).clamp(0.0, 0.99)
}

fn batch(common: &Common, bins: usize) -> Outcome {
    let cfg = load_config(common)?;
    let dir = artifact_dir(common, "cheaptalk-batch")?;
    freeze(&dir, &cfg)?;
    let result = run_batch(&cfg, cfg.runs, common.parallel)?;
    write_runs_csv(&dir.join("runs.csv"), &batch_rows(&result))?;
    for r in result.successes() {
        write_run_dir(&dir.join("runs").join(format!("seed-{}", r.seed)), r)?;
    }
    let welfare = result.welfare();
    if !welfare.is_empty() {
        let h = histogram(&welfare, histogram_floor(cfg.k, &welfare), 1.0, bins)?;
        write_histogram_csv(&dir.join("histogram.csv"), &h)?;
    }
    if let Some(i) = result.summary.median_run {
        let r = result.runs[i].outcome.as_ref().expect("median run succeeded");
        write_matrix_csv(&dir.join("median_policy.csv"), r.policy.matrix())?;
    }
    let s = &result.summary;
    fs::write(
        dir.join("summary.toml"),
        format!(
            "runs = {}\nfailures = {}\nconverged = {}\nwelfare_min = {}\nwelfare_median = {}\nwelfare_max = {}\nmean_sender_payoff = {}\nmean_receiver_payoff = {}\n",
            s.runs, s.failures, s.converged, s.welfare_min, s.welfare_median, s.welfare_max, s.mean_sender_payoff, s.mean_receiver_payoff
        ),
    )?;
    println!(
        "{} runs ({} failed, {} converged), welfare min {:.6} median {:.6} max {:.6} -> {}",
        s.runs,
        s.failures,
        s.converged,
        s.welfare_min,
        s.welfare_median,
        s.welfare_max,
        dir.display()
    );
    if s.failures == s.runs {
        return Err(Failure::Runtime("every run failed".into()));
    }
    Ok(())
}

/// Writes `name` under `--out` if given, otherwise prints the CSV.
fn write_or_print(common: &Common, name: &str, write: impl Fn(&mut dyn Write) -> cheaptalk::Result<()>) -> Outcome {
    match &common.out {
        Some(dir) => {
            fs::create_dir_all(dir)?;
            let path = dir.join(name);
            if path.exists() && !common.force {
                return Err(Failure::Usage(format!("{} exists; pass --force to replace it", path.display())));
            }
            write(&mut fs::File::create(&path)?)?;
            info!("wrote {}", path.display());
        }
        None => write(&mut std::io::stdout().lock())?,
    }
    Ok(())
}

fn bound(common: &Common, k: usize, k_max: Option<usize>, exhaustive: bool) -> Outcome {
    let search = if exhaustive { BoundSearch::Exhaustive } else { BoundSearch::Symmetric };
    let hi = k_max.unwrap_or(k);
    if hi < k {
        return Err(Failure::Usage(format!("--k-max {hi} is below --k {k}")));
    }
    let reports = (k..=hi).step_by(2).map(|k| worst_case_bound(k, search)).collect::<cheaptalk::Result<Vec<_>>>()?;
    write_or_print(common, "bound.csv", |w| write_bound(w, &reports))
}

fn enumerate(common: &Common, k: usize, b: f64, epsilon: f64) -> Outcome {
    let entries = enumerate_pure_connected_pbe(k, Bias::new(b)?, epsilon)?;
    write_or_print(common, "pbe.csv", |w| write_pbe(w, &entries))
}

fn ode_line(r: &OdeRun) -> String {
    let ret = r.return_check.as_ref().map_or(String::new(), |c| format!(" return-distance={:e}", c.final_distance));
    format!(
        "{}: {} settled={} iterations={} residual={:e} max-re={} neutral={}{ret}",
        r.start,
        r.report.classification,
        r.report.settled,
        r.report.iterations,
        r.report.residual_norm,
        r.report.max_real_part().map_or("n/a".to_string(), |v| format!("{v:e}")),
        r.report.zero_subspace_dim
    )
}

fn ode(common: &Common) -> Outcome {
    let cfg = load_config(common)?;
    let dir = artifact_dir(common, "cheaptalk-ode")?;
    freeze(&dir, &cfg)?;
    let sys = ode_system(&cfg)?;
    let runs = run_ode_analysis(&cfg)?;
    for r in &runs {
        println!("{}", ode_line(r));
        let name = r.start.to_string();
        write_matrix_csv(&dir.join(format!("rest-{name}.csv")), &r.report.point)?;
        if let Some(c) = &r.return_check {
            write_return_csv(&dir.join(format!("return-{name}.csv")), &sys, &r.report.point, c)?;
        }
    }
    write_ode_csv(&dir.join("ode.csv"), &runs)?;
    let attractors = runs.iter().filter(|r| r.report.classification == Classification::Attractor).count();
    println!("{attractors}/{} starts reach an attractor -> {}", runs.len(), dir.display());
    Ok(())
}

fn report(kind: &ReportKind) -> Outcome {
    match kind {
        ReportKind::Histogram { common, runs, bins, lo, hi } => {
            let rows = read_runs_csv(runs)?;
            let welfare: Vec<f64> = rows.iter().filter(|r| r.error.is_empty()).map(|r| r.welfare).collect();
            let lo = lo.unwrap_or_else(|| welfare.iter().copied().fold(1.0, f64::min).min(*hi - 1e-3));
            let h = histogram(&welfare, lo, *hi, *bins)?;
            write_or_print(common, "histogram.csv", |w| write_histogram(w, &h))
        }
        ReportKind::Ratio { common, biases, pbe_epsilon } => {
            let base = load_config(common)?;
            let eps = pbe_epsilon.unwrap_or(base.schedules.eps_floor);
            let cfgs: Vec<ExperimentConfig> = biases
                .iter()
                .map(|&b| ExperimentConfig { b, ..base.clone() })
                .collect();
            let rows = payoff_ratio_report(&cfgs, common.parallel, eps)?;
            let dir = artifact_dir(common, "cheaptalk-ratio")?;
            freeze(&dir, &base)?;
            write_ratio_csv(&dir.join("ratios.csv"), &rows)?;
            for r in &rows {
                println!("b={} {}: learned {:.6} equilibrium {:.6} ratio {:.6}", r.b, r.role, r.learned, r.equilibrium, r.ratio);
            }
            Ok(())
        }
        ReportKind::Sweep { common, gammas, biases } => {
            let base = load_config(common)?;
            let rows = decay_sweep(gammas, biases, &base, common.parallel)?;
            let dir = artifact_dir(common, "cheaptalk-sweep")?;
            freeze(&dir, &base)?;
            write_sweep_csv(&dir.join("sweep.csv"), &rows)?;
            for r in &rows {
                println!("gamma={} b={}: payoff {:.6} rescaled {:.4}", r.gamma, r.b, r.payoff, r.rescaled);
            }
            Ok(())
        }
    }
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Simulate { common }
            | Command::Batch { common, .. }
            | Command::Bound { common, .. }
            | Command::Enumerate { common, .. }
            | Command::Ode { common } => common,
            Command::Report { kind } => match kind {
                ReportKind::Histogram { common, .. } | ReportKind::Ratio { common, .. } | ReportKind::Sweep { common, .. } => common,
            },
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    match &cli.command {
        Command::Simulate { common } => simulate(common),
        Command::Batch { common, bins } => batch(common, *bins),
        Command::Bound { common, k, k_max, exhaustive } => bound(common, *k, *k_max, *exhaustive),
        Command::Enumerate { common, k, b, epsilon } => enumerate(common, *k, *b, *epsilon),
        Command::Ode { common } => ode(common),
        Command::Report { kind } => report(kind),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let common = cli.command.common();
    let level = match (common.quiet, common.verbose) {
        (true, _) => log::LevelFilter::Error,
        (false, 0) => log::LevelFilter::Warn,
        (false, 1) => log::LevelFilter::Info,
        (false, 2) => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
    }
}
