//! Receiver behavior: exact Bayesian best response, or a faster-timescale learner
//! that tracks it.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::game::{best_response, ExploredPolicy, ReceiverResponse, StateGrid};
use crate::sender::{played_policy, QTable, StepSize};

/// Range the learning receiver's actions are clamped to.
pub const ACTION_CLAMP: (f64, f64) = (-0.5, 1.5);

/// `beta_t = b0 / (t + 1)^p`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    pub b0: f64,
    pub p: f64,
}

impl Default for BetaSchedule {
    fn default() -> Self {
        BetaSchedule { b0: 1.0, p: 0.6 }
    }
}

impl BetaSchedule {
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        self.b0 / ((t + 1) as f64).powf(self.p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b0 > 0.0 && self.b0 <= 1.0) {
            return Err(Error::Schedule(format!("receiver step scale {} outside (0, 1]", self.b0)));
        }
        if !(self.p > 0.5 && self.p <= 1.0) {
            return Err(Error::Schedule(format!("receiver step exponent {} outside (0.5, 1]", self.p)));
        }
        Ok(())
    }
}

/// Outcome of the two-timescale compatibility check.
#[derive(Debug, Clone, PartialEq)]
pub enum TimescaleCheck {
    Ok,
    /// Constant sender steps: the ratio condition cannot hold and is not enforced.
    Skipped(String),
}

/// Requires the sender's steps to vanish faster than the receiver's.
pub fn check_timescales(alpha: &StepSize, beta: &BetaSchedule) -> Result<TimescaleCheck> {
    beta.validate()?;
    match alpha.decay_exponent() {
        None => Ok(TimescaleCheck::Skipped(format!(
            "constant sender step {alpha:?} with receiver exponent {}: alpha/beta does not vanish",
            beta.p
        ))),
        Some(q) if q > beta.p => Ok(TimescaleCheck::Ok),
        Some(q) => Err(Error::Schedule(format!(
            "sender step exponent {q} must exceed receiver exponent {} for alpha/beta to vanish",
            beta.p
        ))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum ReceiverMode {
    #[default]
    Exact,
    Learning { beta: BetaSchedule, sigma_r: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverState {
    pub mode: ReceiverMode,
    pub y: ReceiverResponse,
}

impl ReceiverState {
    /// Starts at the prior mean for every message.
    pub fn new(mode: ReceiverMode, k: usize) -> Result<Self> {
        if let ReceiverMode::Learning { beta, sigma_r } = mode {
            beta.validate()?;
            if !(sigma_r >= 0.0 && sigma_r.is_finite()) {
                return Err(Error::Config(format!("receiver shock deviation {sigma_r} must be finite and nonnegative")));
            }
        }
        Ok(ReceiverState {
            mode,
            y: ReceiverResponse::constant(k, 0.5),
        })
    }
}

pub fn respond_exact(mubar: &ExploredPolicy, grid: &StateGrid) -> Result<ReceiverResponse> {
    best_response(mubar, grid)
}

/// Moves each action a step `beta` toward `target`, adding a Gaussian shock.
#[inline]
pub fn learning_update<R: Rng + ?Sized>(
    y: &mut [f64],
    target: &[f64],
    beta: f64,
    shock: Option<&Normal<f64>>,
    rng: &mut R,
) {
    for (yi, &ti) in y.iter_mut().zip(target) {
        let r = shock.map_or(0.0, |d| d.sample(rng));
        *yi = ((1.0 - beta) * *yi + beta * (ti + r)).clamp(ACTION_CLAMP.0, ACTION_CLAMP.1);
    }
}

pub(crate) fn shock_distribution(sigma_r: f64) -> Option<Normal<f64>> {
    (sigma_r > 0.0).then(|| Normal::new(0.0, sigma_r).expect("validated deviation"))
}

/// One learning-receiver period against the sender's current Q-table.
pub fn respond_learning_step<R: Rng + ?Sized>(
    state: &mut ReceiverState,
    q: &QTable,
    tau: f64,
    epsilon: f64,
    t: u64,
    grid: &StateGrid,
    rng: &mut R,
) -> Result<()> {
    let ReceiverMode::Learning { beta, sigma_r } = state.mode else {
        return Err(Error::Config("learning step requested for an exact receiver".into()));
    };
    let target = best_response(&played_policy(q, tau, epsilon)?, grid)?;
    let shock = shock_distribution(sigma_r);
    learning_update(&mut state.y.y, &target.y, beta.at(t), shock.as_ref(), rng);
    state.y.degenerate = target.degenerate;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::{explored_policy, Policy};
    use crate::matrix::SquareMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn grid() -> StateGrid {
        StateGrid::new(5).unwrap()
    }

    fn some_q() -> QTable {
        QTable::new(SquareMatrix::from_fn(5, |x, m| -((x as f64 - m as f64) / 4.0).powi(2) - 0.01 * m as f64)).unwrap()
    }

    #[test]
    fn exact_matches_best_response() {
        let g = StateGrid::new(21).unwrap();
        let mubar = explored_policy(&Policy::fully_revealing(21), 0.1).unwrap();
        let r = respond_exact(&mubar, &g).unwrap();
        assert_eq!(r, best_response(&mubar, &g).unwrap());
        for m in 0..21 {
            assert!((r.y[m] - (0.9 * g.state(m) + 0.05)).abs() < 1e-12);
        }
        let babble = explored_policy(&Policy::babbling(21), 0.0).unwrap();
        assert!(respond_exact(&babble, &g).unwrap().y.iter().all(|y| (y - 0.5).abs() < 1e-12));
    }

    #[test]
    fn unit_step_jumps_to_posterior() {
        let g = grid();
        let q = some_q();
        let mut state = ReceiverState::new(
            ReceiverMode::Learning { beta: BetaSchedule { b0: 1.0, p: 1.0 }, sigma_r: 0.0 },
            5,
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        respond_learning_step(&mut state, &q, 0.05, 0.01, 0, &g, &mut rng).unwrap();
        let exact = best_response(&played_policy(&q, 0.05, 0.01).unwrap(), &g).unwrap();
        assert_eq!(state.y.y, exact.y);
    }

    #[test]
    fn deterministic_averaging_converges_monotonically() {
        let g = grid();
        let q = some_q();
        let exact = best_response(&played_policy(&q, 0.05, 0.01).unwrap(), &g).unwrap();
        let mut state = ReceiverState::new(
            ReceiverMode::Learning { beta: BetaSchedule { b0: 0.5, p: 1.0 }, sigma_r: 0.0 },
            5,
        )
        .unwrap();
        state.y.y = vec![-0.5, 1.5, 0.0, 1.0, 0.2];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let dist = |y: &[f64]| y.iter().zip(&exact.y).fold(0.0f64, |a, (p, q)| a.max((p - q).abs()));
        let mut prev = dist(&state.y.y);
        let beta = state_beta(&state);
        for t in 0..100_000 {
            learning_update(&mut state.y.y, &exact.y, beta.at(t), None, &mut rng);
            let d = dist(&state.y.y);
            assert!(d <= prev + 1e-15);
            prev = d;
        }
        assert!(prev < 1e-2);

        // b0 = 1, p = 1 is the running mean and reaches the target after the first step.
        let mut y = vec![0.3; 5];
        for t in 0..100_000 {
            learning_update(&mut y, &exact.y, BetaSchedule { b0: 1.0, p: 1.0 }.at(t), None, &mut rng);
        }
        assert!(dist(&y) < 1e-6);
    }

    fn state_beta(s: &ReceiverState) -> BetaSchedule {
        match s.mode {
            ReceiverMode::Learning { beta, .. } => beta,
            ReceiverMode::Exact => unreachable!(),
        }
    }

    #[test]
    fn noisy_learning_tracks_posterior() {
        let g = grid();
        let q = some_q();
        let exact = best_response(&played_policy(&q, 0.05, 0.01).unwrap(), &g).unwrap();
        let mut y = vec![0.5; 5];
        let shock = shock_distribution(0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let beta = BetaSchedule { b0: 1.0, p: 0.6 };
        for t in 0..1_000_000 {
            learning_update(&mut y, &exact.y, beta.at(t), shock.as_ref(), &mut rng);
        }
        for (a, b) in y.iter().zip(&exact.y) {
            assert!((a - b).abs() < 0.01, "{a} vs {b}");
        }
    }

    #[test]
    fn clamping() {
        let mut y = vec![1.4, -0.4];
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        learning_update(&mut y, &[10.0, -10.0], 0.5, None, &mut rng);
        assert_eq!(y, vec![1.5, -0.5]);
    }

    #[test]
    fn timescale_rules() {
        let beta = BetaSchedule { b0: 1.0, p: 0.6 };
        assert_eq!(check_timescales(&StepSize::THEORY, &beta).unwrap(), TimescaleCheck::Ok);
        assert_eq!(
            check_timescales(&StepSize::Polynomial { a: 1.0, q: 0.8 }, &beta).unwrap(),
            TimescaleCheck::Ok
        );
        assert!(check_timescales(&StepSize::Polynomial { a: 1.0, q: 0.6 }, &beta).is_err());
        assert!(check_timescales(&StepSize::THEORY, &BetaSchedule { b0: 1.0, p: 1.0 }).is_err());
        assert!(matches!(
            check_timescales(&StepSize::Constant(0.05), &beta).unwrap(),
            TimescaleCheck::Skipped(_)
        ));
        assert!(BetaSchedule { b0: 1.0, p: 0.5 }.validate().is_err());
    }

    #[test]
    fn exact_mode_rejects_learning_step() {
        let mut s = ReceiverState::new(ReceiverMode::Exact, 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(respond_learning_step(&mut s, &some_q(), 0.1, 0.1, 0, &grid(), &mut rng).is_err());
    }
}
