//! CSV artifacts. Every file has a header row; floats use Rust's shortest
//! round-trip formatting.

use std::fs::{self, File};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::OdeSystem;
use crate::equilibria::{BoundReport, PbeEntry};
use crate::error::{Error, Result};
use crate::harness::{BatchResult, Histogram, OdeRun, RatioRow, ReturnCheck, RunResult, SweepRow};
use crate::matrix::SquareMatrix;

/// One line of a batch's `runs.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub seed: u64,
    pub converged: bool,
    pub steps: u64,
    pub welfare: f64,
    pub sender_payoff: f64,
    pub receiver_payoff: f64,
    pub connected: bool,
    pub msfr: bool,
    pub saps: bool,
    pub cycle_events: u64,
    pub error: String,
}

impl RunRow {
    pub fn from_result(r: &RunResult) -> Self {
        RunRow {
            seed: r.seed,
            converged: r.converged,
            steps: r.steps_used,
            welfare: r.welfare,
            sender_payoff: r.sender_payoff,
            receiver_payoff: r.receiver_payoff,
            connected: r.shape.connected,
            msfr: r.shape.msfr,
            saps: r.shape.saps,
            cycle_events: r.cycles.qualifying,
            error: String::new(),
        }
    }

    pub fn failed(seed: u64, error: &str) -> Self {
        RunRow {
            seed,
            converged: false,
            steps: 0,
            welfare: f64::NAN,
            sender_payoff: f64::NAN,
            receiver_payoff: f64::NAN,
            connected: false,
            msfr: false,
            saps: false,
            cycle_events: 0,
            error: error.to_string(),
        }
    }
}

pub fn batch_rows(batch: &BatchResult) -> Vec<RunRow> {
    batch
        .runs
        .iter()
        .map(|r| match &r.outcome {
            Ok(v) => RunRow::from_result(v),
            Err(e) => RunRow::failed(r.seed, e),
        })
        .collect()
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], empty_header: &[&str]) -> Result<()> {
    write_rows_to(File::create(path)?, rows, empty_header)
}

fn write_rows_to<T: Serialize, W: Write>(out: W, rows: &[T], empty_header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if rows.is_empty() {
        w.write_record(empty_header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

const RUN_HEADER: &[&str] = &[
    "seed",
    "converged",
    "steps",
    "welfare",
    "sender_payoff",
    "receiver_payoff",
    "connected",
    "msfr",
    "saps",
    "cycle_events",
    "error",
];

pub fn write_runs_csv(path: &Path, rows: &[RunRow]) -> Result<()> {
    write_rows(path, rows, RUN_HEADER)
}

pub fn read_runs_csv(path: &Path) -> Result<Vec<RunRow>> {
    read_rows(path)
}

/// `K` rows of `K` values under a `m0,...,m{K-1}` header; row `x` is state `x`.
pub fn write_matrix_csv(path: &Path, m: &SquareMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.dim()).map(|j| format!("m{j}")))?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<SquareMatrix> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        rows.push(row.map_err(|e| Error::Io(format!("{}: row {i}: {e}", path.display())))?);
    }
    SquareMatrix::from_rows(&rows).ok_or_else(|| Error::Io(format!("{}: not a square matrix", path.display())))
}

#[derive(Serialize, Deserialize)]
struct TrajectoryRow {
    step: u64,
    welfare: f64,
}

pub fn write_trajectory_csv(path: &Path, trajectory: &[(u64, f64)]) -> Result<()> {
    let rows: Vec<TrajectoryRow> = trajectory.iter().map(|&(step, welfare)| TrajectoryRow { step, welfare }).collect();
    write_rows(path, &rows, &["step", "welfare"])
}

/// `q.csv`, `policy.csv`, `welfare.csv` and, when cycles were found, `cycle_average.csv`.
pub fn write_run_dir(dir: &Path, r: &RunResult) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_matrix_csv(&dir.join("q.csv"), r.q.matrix())?;
    write_matrix_csv(&dir.join("policy.csv"), r.policy.matrix())?;
    write_trajectory_csv(&dir.join("welfare.csv"), &r.welfare_trajectory)?;
    if let Some(avg) = &r.cycles.average {
        write_matrix_csv(&dir.join("cycle_average.csv"), avg.matrix())?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramRow {
    pub bin_lo: f64,
    pub bin_hi: f64,
    pub count: usize,
}

pub fn write_histogram_csv(path: &Path, h: &Histogram) -> Result<()> {
    write_histogram(File::create(path)?, h)
}

pub fn write_histogram<W: Write>(w: W, h: &Histogram) -> Result<()> {
    let rows: Vec<HistogramRow> =
        h.bins.iter().map(|b| HistogramRow { bin_lo: b.lo, bin_hi: b.hi, count: b.count }).collect();
    write_rows_to(w, &rows, &["bin_lo", "bin_hi", "count"])
}

pub fn read_histogram_csv(path: &Path) -> Result<Vec<HistogramRow>> {
    read_rows(path)
}

#[derive(Serialize)]
struct RatioCsv<'a> {
    bias: f64,
    role: &'a str,
    learned: f64,
    equilibrium: f64,
    ratio: f64,
    absolute: bool,
}

pub fn write_ratio_csv(path: &Path, rows: &[RatioRow]) -> Result<()> {
    let roles: Vec<String> = rows.iter().map(|r| r.role.to_string()).collect();
    let out: Vec<RatioCsv> = rows
        .iter()
        .zip(&roles)
        .map(|(r, role)| RatioCsv {
            bias: r.b,
            role,
            learned: r.learned,
            equilibrium: r.equilibrium,
            ratio: r.ratio,
            absolute: r.absolute,
        })
        .collect();
    write_rows(path, &out, &["bias", "role", "learned", "equilibrium", "ratio", "absolute"])
}

#[derive(Serialize)]
struct SweepCsv {
    gamma: f64,
    bias: f64,
    payoff: f64,
    rescaled: f64,
}

pub fn write_sweep_csv(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let out: Vec<SweepCsv> =
        rows.iter().map(|r| SweepCsv { gamma: r.gamma, bias: r.b, payoff: r.payoff, rescaled: r.rescaled }).collect();
    write_rows(path, &out, &["gamma", "bias", "payoff", "rescaled"])
}

#[derive(Serialize)]
struct BoundCsv {
    k: usize,
    n_hat: f64,
    n_k: usize,
    max_pool: usize,
    u_plus: f64,
    u_minus: f64,
    u_lower: f64,
    argmin: String,
    side: String,
}

pub fn write_bound_csv(path: &Path, reports: &[BoundReport]) -> Result<()> {
    write_bound(File::create(path)?, reports)
}

pub fn write_bound<W: Write>(w: W, reports: &[BoundReport]) -> Result<()> {
    let out: Vec<BoundCsv> = reports
        .iter()
        .map(|r| BoundCsv {
            k: r.k,
            n_hat: r.n_hat,
            n_k: r.n_k,
            max_pool: r.max_pool,
            u_plus: r.u_lower_closed_plus,
            u_minus: r.u_lower_closed_minus,
            u_lower: r.u_lower_brute,
            argmin: r.argmin_partition.to_string(),
            side: r.side_sizes().iter().map(usize::to_string).collect::<Vec<_>>().join(","),
        })
        .collect();
    write_rows_to(w, &out, &["k", "n_hat", "n_k", "max_pool", "u_plus", "u_minus", "u_lower", "argmin", "side"])
}

#[derive(Serialize)]
struct PbeCsv {
    partition: String,
    pools: usize,
    sender_payoff: f64,
    receiver_payoff: f64,
    welfare: f64,
    best: bool,
}

pub fn write_pbe_csv(path: &Path, entries: &[PbeEntry]) -> Result<()> {
    write_pbe(File::create(path)?, entries)
}

/// Entries are expected sorted best first; the first row is flagged.
pub fn write_pbe<W: Write>(w: W, entries: &[PbeEntry]) -> Result<()> {
    let out: Vec<PbeCsv> = entries
        .iter()
        .enumerate()
        .map(|(i, e)| PbeCsv {
            partition: e.partition.to_string(),
            pools: e.partition.len(),
            sender_payoff: e.sender_payoff,
            receiver_payoff: e.receiver_payoff,
            welfare: e.welfare,
            best: i == 0,
        })
        .collect();
    write_rows_to(w, &out, &["partition", "pools", "sender_payoff", "receiver_payoff", "welfare", "best"])
}

#[derive(Serialize)]
struct OdeCsv {
    start: String,
    classification: String,
    settled: bool,
    iterations: usize,
    residual: f64,
    max_real_part: Option<f64>,
    neutral: usize,
    return_distance: Option<f64>,
}

/// One row per start; empty cells where no eigenvalues or return check exist.
pub fn write_ode_csv(path: &Path, runs: &[OdeRun]) -> Result<()> {
    let out: Vec<OdeCsv> = runs
        .iter()
        .map(|r| OdeCsv {
            start: r.start.to_string(),
            classification: r.report.classification.to_string(),
            settled: r.report.settled,
            iterations: r.report.iterations,
            residual: r.report.residual_norm,
            max_real_part: r.report.max_real_part(),
            neutral: r.report.zero_subspace_dim,
            return_distance: r.return_check.as_ref().map(|c| c.final_distance),
        })
        .collect();
    write_rows(
        path,
        &out,
        &["start", "classification", "settled", "iterations", "residual", "max_real_part", "neutral", "return_distance"],
    )
}

#[derive(Serialize)]
struct ReturnCsv {
    t: f64,
    distance: f64,
}

/// Policy-space distance to the rest point along a return check.
pub fn write_return_csv(path: &Path, sys: &OdeSystem, rest: &SquareMatrix, check: &ReturnCheck) -> Result<()> {
    let target = sys.as_policy(rest);
    let out: Vec<ReturnCsv> = check
        .trajectory
        .times
        .iter()
        .zip(&check.trajectory.states)
        .map(|(&t, s)| ReturnCsv { t, distance: sys.as_policy(s).sup_distance(&target) })
        .collect();
    write_rows(path, &out, &["t", "distance"])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::{histogram, run_batch, ExperimentConfig};

    #[test]
    fn matrix_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = SquareMatrix::from_fn(3, |x, y| (x as f64 + 0.1) / (y as f64 + 3.0) - 1e-17 * x as f64);
        write_matrix_csv(&p, &m).unwrap();
        assert_eq!(read_matrix_csv(&p).unwrap(), m);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("m0,m1,m2\n"));
    }

    #[test]
    fn runs_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.k = 5;
        cfg.steps = 5_000;
        cfg.convergence.window = 2_000;
        let batch = run_batch(&cfg, 3, 1).unwrap();
        let rows = batch_rows(&batch);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("runs.csv");
        write_runs_csv(&p, &rows).unwrap();
        assert_eq!(read_runs_csv(&p).unwrap(), rows);
        let header = fs::read_to_string(&p).unwrap().lines().next().unwrap().to_string();
        assert_eq!(header, RUN_HEADER.join(","));
    }

    #[test]
    fn empty_tables_keep_headers() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("runs.csv");
        write_runs_csv(&p, &[]).unwrap();
        assert_eq!(fs::read_to_string(&p).unwrap().trim(), RUN_HEADER.join(","));
        let h = histogram(&[0.5], 0.0, 1.0, 2).unwrap();
        let p = dir.path().join("h.csv");
        write_histogram_csv(&p, &h).unwrap();
        let back = read_histogram_csv(&p).unwrap();
        assert_eq!(back.iter().map(|r| r.count).collect::<Vec<_>>(), vec![0, 1]);
    }
}
