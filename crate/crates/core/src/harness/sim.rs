use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::config::ExperimentConfig;
use super::convergence::ConvergenceMonitor;
use super::cycles::{CycleSummary, CycleTracker};
use crate::equilibria::{classify_policy, PolicyShape, DEFAULT_SUPPORT_TOL};
use crate::error::Result;
use crate::game::{
    best_response, expected_receiver_payoff, expected_sender_payoff, explored_policy, prior_variance, welfare_of_played,
    Policy, StateGrid,
};
use crate::matrix::SquareMatrix;
use crate::receiver::{BetaSchedule, ReceiverMode, ACTION_CLAMP};
use crate::sender::{init_qtable, sample_index, softmax_row, QTable, Schedules, VisitCounts};

/// `exp(z)` is exactly zero in double precision below this exponent.
const UNDERFLOW_EXPONENT: f64 = -746.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub seed: u64,
    pub converged: bool,
    pub steps_used: u64,
    pub q: QTable,
    /// Softmax policy at the final temperature, before exploration.
    pub policy: Policy,
    /// Exploration weight in force at the end of the run.
    pub epsilon: f64,
    /// `(step, welfare)` at every snapshot.
    pub welfare_trajectory: Vec<(u64, f64)>,
    pub welfare: f64,
    pub sender_payoff: f64,
    pub receiver_payoff: f64,
    pub shape: PolicyShape,
    pub cycles: CycleSummary,
}

struct LearningReceiver {
    y: Vec<f64>,
    beta: BetaSchedule,
    shock: Option<Normal<f64>>,
}

/// One seeded run of the sender-receiver loop, advanced a period at a time.
///
/// The softmax policy and its column sums are kept incrementally, so a period
/// costs `O(K)` once the temperature has settled.
pub struct Simulation {
    k: usize,
    states: Vec<f64>,
    b: f64,
    sched: Schedules,
    q: Vec<f64>,
    soft: Vec<f64>,
    col_mass: Vec<f64>,
    col_weighted: Vec<f64>,
    visits: VisitCounts,
    noise: Option<Normal<f64>>,
    receiver: Option<LearningReceiver>,
    rng: ChaCha8Rng,
    tau: f64,
    tau_settles_at: u64,
    x: usize,
    t: u64,
    old_row: Vec<f64>,
    target: Vec<f64>,
    cycles: CycleTracker,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let grid = cfg.grid()?;
        let k = grid.k();
        let bias = cfg.bias()?;
        let sched = cfg.sender_schedules();
        let q = init_qtable(&cfg.init_mode(), &grid, bias)?.into_matrix().into_vec();
        let receiver = match cfg.receiver_mode() {
            ReceiverMode::Exact => None,
            ReceiverMode::Learning { beta, sigma_r } => Some(LearningReceiver {
                y: vec![0.5; k],
                beta,
                shock: (sigma_r > 0.0).then(|| Normal::new(0.0, sigma_r).expect("validated")),
            }),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = rng.gen_range(0..k);
        let mut sim = Simulation {
            k,
            states: grid.states().to_vec(),
            b: bias.value(),
            sched,
            q,
            soft: vec![0.0; k * k],
            col_mass: vec![0.0; k],
            col_weighted: vec![0.0; k],
            visits: VisitCounts::new(k),
            noise: cfg.noise_spec().distribution(),
            receiver,
            rng,
            tau: sched.tau_at(0),
            tau_settles_at: sched.tau_settles_at(),
            x,
            t: 0,
            old_row: vec![0.0; k],
            target: vec![0.0; k],
            cycles: CycleTracker::new(k, cfg.cycles.threshold, cfg.cycles.window),
        };
        sim.refresh();
        Ok(sim)
    }

    /// Recomputes every softmax row and the column sums from scratch.
    fn refresh(&mut self) {
        let k = self.k;
        for x in 0..k {
            softmax_row(&self.q[x * k..(x + 1) * k], self.tau, &mut self.soft[x * k..(x + 1) * k]);
        }
        self.col_mass.iter_mut().for_each(|v| *v = 0.0);
        self.col_weighted.iter_mut().for_each(|v| *v = 0.0);
        for x in 0..k {
            let s = self.states[x];
            for m in 0..k {
                let p = self.soft[x * k + m];
                self.col_mass[m] += p;
                self.col_weighted[m] += s * p;
            }
        }
    }

    /// Posterior mean after message `m` under the current policy mixed with `eps`.
    #[inline]
    fn posterior(&self, m: usize, eps: f64) -> f64 {
        let mass = (1.0 - eps) * self.col_mass[m] + eps;
        if mass > 0.0 {
            ((1.0 - eps) * self.col_weighted[m] + 0.5 * eps) / mass
        } else {
            0.5
        }
    }

    /// True when the row was exactly one-hot before the update of entry `m` and
    /// recomputing it would give the same one-hot row, because every other
    /// entry's weight still underflows to zero.
    #[inline]
    fn stays_one_hot(&self, row: usize, m: usize) -> bool {
        let k = self.k;
        let soft = &self.soft[row..row + k];
        let Some(a) = soft.iter().position(|&p| p == 1.0) else {
            return false;
        };
        if soft.iter().enumerate().any(|(j, &p)| j != a && p != 0.0) {
            return false;
        }
        let q = &self.q[row..row + k];
        let cutoff = q[a] + UNDERFLOW_EXPONENT * self.tau;
        if m != a {
            return q[m] < cutoff;
        }
        q.iter().enumerate().all(|(j, &v)| j == a || v < cutoff)
    }

    /// Advances one period.
    pub fn step(&mut self) {
        let k = self.k;
        let t = self.t;
        let tau = if t >= self.tau_settles_at { self.sched.tau_floor } else { self.sched.tau_at(t) };
        if tau != self.tau {
            self.tau = tau;
            self.refresh();
        }
        let eps = self.sched.epsilon_at(t);
        let x = self.x;
        let row = x * k;

        let u: f64 = self.rng.gen();
        let m = if u < eps {
            ((u / eps * k as f64) as usize).min(k - 1)
        } else {
            sample_index(&self.soft[row..row + k], (u - eps) / (1.0 - eps))
        };

        let y = match &self.receiver {
            None => self.posterior(m, eps),
            Some(r) => r.y[m],
        };
        if self.receiver.is_some() {
            for j in 0..k {
                self.target[j] = self.posterior(j, eps);
            }
        }
        if let Some(r) = self.receiver.as_mut() {
            let beta = r.beta.at(t);
            for (yj, &tj) in r.y.iter_mut().zip(&self.target) {
                let shock = r.shock.as_ref().map_or(0.0, |d| d.sample(&mut self.rng));
                *yj = ((1.0 - beta) * *yj + beta * (tj + shock)).clamp(ACTION_CLAMP.0, ACTION_CLAMP.1);
            }
        }

        let d = y - self.states[x] - self.b;
        let mut payoff = -d * d;
        if let Some(n) = &self.noise {
            payoff += n.sample(&mut self.rng);
        }
        let x_next = self.rng.gen_range(0..k);

        let alpha = self.sched.alpha.at(self.visits.visit(x, m));
        let continuation = if self.sched.beta > 0.0 {
            self.sched.beta * self.q[x_next * k..(x_next + 1) * k].iter().copied().fold(f64::NEG_INFINITY, f64::max)
        } else {
            0.0
        };
        let qv = &mut self.q[row + m];
        *qv = (1.0 - alpha) * *qv + alpha * (payoff + continuation);

        if self.stays_one_hot(row, m) {
            self.x = x_next;
            self.t += 1;
            return;
        }
        self.old_row.copy_from_slice(&self.soft[row..row + k]);
        softmax_row(&self.q[row..row + k], self.tau, &mut self.soft[row..row + k]);
        let s = self.states[x];
        let mut change = 0.0f64;
        for j in 0..k {
            let delta = self.soft[row + j] - self.old_row[j];
            self.col_mass[j] += delta;
            self.col_weighted[j] += s * delta;
            change = change.max(delta.abs());
        }
        self.cycles.record(change, &self.soft);

        self.x = x_next;
        self.t += 1;
    }

    pub fn steps_taken(&self) -> u64 {
        self.t
    }

    pub fn epsilon(&self) -> f64 {
        self.sched.epsilon_at(self.t)
    }

    pub fn q_table(&self) -> QTable {
        QTable::new(SquareMatrix::from_vec(self.k, self.q.clone()).expect("k x k")).expect("finite entries")
    }

    /// Current softmax policy, re-normalized row by row.
    pub fn policy(&self) -> Policy {
        let k = self.k;
        let mut m = SquareMatrix::zeros(k);
        for x in 0..k {
            softmax_row(&self.q[x * k..(x + 1) * k], self.tau, m.row_mut(x));
        }
        Policy::from_matrix_unchecked(m)
    }

    /// Welfare of the current played policy from the running column sums.
    pub fn welfare_estimate(&self) -> f64 {
        let k = self.k as f64;
        let eps = self.epsilon();
        let second_moment: f64 = self.states.iter().map(|s| s * s).sum::<f64>() / k;
        let explained: f64 = (0..self.k)
            .map(|m| {
                let mass = (1.0 - eps) * self.col_mass[m] + eps;
                let y = self.posterior(m, eps);
                mass / k * y * y
            })
            .sum();
        let grid = StateGrid::new(self.k).expect("validated");
        let residual = second_moment - explained;
        (1.0 - residual / prior_variance(&grid)).clamp(0.0, 1.0)
    }
}

/// Runs the loop until the convergence criterion holds or `cfg.steps` periods elapse.
pub fn run_simulation(cfg: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    let mut sim = Simulation::new(cfg, seed)?;
    let grid = cfg.grid()?;
    let bias = cfg.bias()?;
    let interval = cfg.snapshot_interval;
    let mut monitor = ConvergenceMonitor::new(cfg.convergence.delta, (cfg.convergence.window / interval) as usize);
    let mut trajectory = Vec::with_capacity((cfg.steps / interval) as usize + 2);
    monitor.push(&sim.policy());
    trajectory.push((0, sim.welfare_estimate()));
    let mut converged = false;
    while sim.steps_taken() < cfg.steps {
        sim.step();
        let t = sim.steps_taken();
        if t % interval == 0 {
            sim.refresh();
            trajectory.push((t, sim.welfare_estimate()));
            if monitor.push(&sim.policy()) {
                converged = true;
                break;
            }
        }
    }
    let policy = sim.policy();
    let epsilon = sim.epsilon();
    let mubar = explored_policy(&policy, epsilon)?;
    let response = best_response(&mubar, &grid)?;
    Ok(RunResult {
        seed,
        converged,
        steps_used: sim.steps_taken(),
        q: sim.q_table(),
        welfare: welfare_of_played(&mubar, &grid)?,
        sender_payoff: expected_sender_payoff(&mubar, &response, bias, &grid)?,
        receiver_payoff: expected_receiver_payoff(&mubar, &response, &grid)?,
        shape: classify_policy(&policy, &grid, DEFAULT_SUPPORT_TOL),
        cycles: sim.cycles.summary(),
        welfare_trajectory: trajectory,
        policy,
        epsilon,
    })
}
