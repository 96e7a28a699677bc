//! Tabular Boltzmann Q-learning sender.

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::game::{explored_policy, sender_payoff, Bias, ExploredPolicy, Policy, StateGrid};
use crate::matrix::SquareMatrix;

/// Payoff estimates `Q(x, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable(SquareMatrix);

impl QTable {
    pub fn new(matrix: SquareMatrix) -> Result<Self> {
        for (x, row) in matrix.rows().enumerate() {
            if let Some(m) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidEntry {
                    row: x,
                    col: m,
                    value: row[m],
                });
            }
        }
        Ok(QTable(matrix))
    }

    pub fn filled(k: usize, value: f64) -> Self {
        QTable(SquareMatrix::filled(k, value))
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.0.dim()
    }

    #[inline]
    pub fn get(&self, x: usize, m: usize) -> f64 {
        self.0[(x, m)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, m: usize, v: f64) {
        self.0[(x, m)] = v;
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        self.0.row(x)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn matrix_mut(&mut self) -> &mut SquareMatrix {
        &mut self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    /// Largest entry of row `x`; ties go to the lowest message index.
    pub fn row_max(&self, x: usize) -> (usize, f64) {
        let row = self.row(x);
        let mut best = (0, row[0]);
        for (m, &v) in row.iter().enumerate().skip(1) {
            if v > best.1 {
                best = (m, v);
            }
        }
        best
    }
}

/// How the Q-table starts out.
#[derive(Debug, Clone, PartialEq)]
pub enum InitMode {
    /// Every message is valued at the payoff of the prior-mean action.
    Babbling,
    /// Diagonal 0, off-diagonal `-delta`.
    FullRevelation { delta: f64 },
    Constant(f64),
    Custom(SquareMatrix),
}

impl InitMode {
    pub const DEFAULT_REVELATION_GAP: f64 = 1.0;
}

pub fn init_qtable(mode: &InitMode, grid: &StateGrid, b: Bias) -> Result<QTable> {
    let k = grid.k();
    match mode {
        InitMode::Babbling => Ok(QTable(SquareMatrix::from_fn(k, |x, _| {
            sender_payoff(grid.state(x), 0.5, b.value())
        }))),
        InitMode::FullRevelation { delta } => {
            if !delta.is_finite() {
                return Err(Error::Config(format!("revelation gap must be finite, got {delta}")));
            }
            Ok(QTable(SquareMatrix::from_fn(k, |x, m| if x == m { 0.0 } else { -delta })))
        }
        InitMode::Constant(c) => {
            if !c.is_finite() {
                return Err(Error::Config(format!("constant initial value must be finite, got {c}")));
            }
            Ok(QTable::filled(k, *c))
        }
        InitMode::Custom(matrix) => {
            if matrix.dim() != k {
                return Err(Error::Dimension {
                    expected: k,
                    actual: matrix.dim(),
                });
            }
            QTable::new(matrix.clone())
        }
    }
}

pub fn check_temperature(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidTemperature(tau))
    }
}

/// Writes `softmax(q / tau)` into `out`, subtracting the row maximum first.
pub fn softmax_row(q: &[f64], tau: f64, out: &mut [f64]) {
    let max = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inv = 1.0 / tau;
    let mut z = 0.0;
    for (o, &v) in out.iter_mut().zip(q) {
        *o = ((v - max) * inv).exp();
        z += *o;
    }
    let inv_z = 1.0 / z;
    for o in out.iter_mut() {
        *o *= inv_z;
    }
}

pub fn softmax_policy(q: &QTable, tau: f64) -> Result<Policy> {
    check_temperature(tau)?;
    let k = q.k();
    let mut out = SquareMatrix::zeros(k);
    for x in 0..k {
        softmax_row(q.row(x), tau, out.row_mut(x));
    }
    Ok(Policy::from_matrix_unchecked(out))
}

/// Inverse-CDF draw from a probability row given `u` uniform on `[0, 1)`.
#[inline]
pub fn sample_index(row: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in row.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum short of u: take the last positive entry.
    row.iter().rposition(|&p| p > 0.0).unwrap_or(row.len() - 1)
}

pub fn sample_message<R: Rng + ?Sized>(x: usize, mubar: &ExploredPolicy, rng: &mut R) -> usize {
    sample_index(mubar.row(x), rng.gen::<f64>())
}

/// Step size as a function of the visit count of the updated pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// `a / (n + c)`.
    RobbinsMonro { a: f64, c: f64 },
    /// `a / (n + 1)^q`.
    Polynomial { a: f64, q: f64 },
}

impl StepSize {
    pub const EXPERIMENT: StepSize = StepSize::Constant(0.05);
    pub const THEORY: StepSize = StepSize::RobbinsMonro { a: 1.0, c: 1.0 };

    /// Step size for a pair already visited `n` times.
    #[inline]
    pub fn at(&self, n: u64) -> f64 {
        let n = n as f64;
        match *self {
            StepSize::Constant(a) => a,
            StepSize::RobbinsMonro { a, c } => a / (n + c),
            StepSize::Polynomial { a, q } => a / (n + 1.0).powf(q),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            StepSize::Constant(a) => a > 0.0 && a <= 1.0,
            StepSize::RobbinsMonro { a, c } => a > 0.0 && c > 0.0 && a <= c,
            StepSize::Polynomial { a, q } => a > 0.0 && a <= 1.0 && q > 0.5 && q <= 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Schedule(format!("step size {self:?} leaves (0, 1] or violates the Robbins-Monro conditions")))
        }
    }

    /// Decay exponent of the schedule; `None` for constant steps.
    pub fn decay_exponent(&self) -> Option<f64> {
        match *self {
            StepSize::Constant(_) => None,
            StepSize::RobbinsMonro { .. } => Some(1.0),
            StepSize::Polynomial { q, .. } => Some(q),
        }
    }
}

/// Exploration weight `eps_t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Exploration {
    Constant(f64),
    /// `max(floor, eps0 * exp(-rate * t))`.
    Exponential { eps0: f64, floor: f64, rate: f64 },
}

impl Exploration {
    #[inline]
    pub fn at(&self, t: u64) -> f64 {
        match *self {
            Exploration::Constant(e) => e,
            Exploration::Exponential { eps0, floor, rate } => floor.max(eps0 * (-rate * t as f64).exp()),
        }
    }

    pub fn floor(&self) -> f64 {
        match *self {
            Exploration::Constant(e) => e,
            Exploration::Exponential { floor, .. } => floor,
        }
    }

    /// First step from which the weight stays at its floor.
    pub fn settles_at(&self) -> u64 {
        match *self {
            Exploration::Constant(_) => 0,
            Exploration::Exponential { eps0, floor, rate } => settle_step(eps0, floor, rate),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = match *self {
            Exploration::Constant(e) => (e, e),
            Exploration::Exponential { eps0, floor, rate } => {
                if !(rate >= 0.0 && rate.is_finite()) {
                    return Err(Error::Schedule(format!("exploration decay rate {rate} must be finite and nonnegative")));
                }
                (eps0, floor)
            }
        };
        crate::game::check_epsilon(a)?;
        crate::game::check_epsilon(b)
    }
}

fn settle_step(start: f64, floor: f64, rate: f64) -> u64 {
    if start <= floor {
        return 0;
    }
    if rate <= 0.0 || floor <= 0.0 {
        return u64::MAX;
    }
    let t = ((start / floor).ln() / rate).ceil();
    // Guard against the exponential evaluating a hair above the floor at `t`.
    let mut t = t as u64;
    while start * (-rate * t as f64).exp() > floor {
        t += 1;
    }
    t
}

/// Learning-rate, temperature, exploration and discount settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedules {
    pub alpha: StepSize,
    pub tau0: f64,
    pub tau_floor: f64,
    pub gamma: f64,
    pub exploration: Exploration,
    pub beta: f64,
}

impl Default for Schedules {
    fn default() -> Self {
        Schedules {
            alpha: StepSize::EXPERIMENT,
            tau0: 0.1,
            tau_floor: 1e-4,
            gamma: 1e-3,
            exploration: Exploration::Constant(1e-3),
            beta: 0.0,
        }
    }
}

impl Schedules {
    /// `tau_t = max(tau_floor, tau0 * exp(-gamma * t))`.
    #[inline]
    pub fn tau_at(&self, t: u64) -> f64 {
        self.tau_floor.max(self.tau0 * (-self.gamma * t as f64).exp())
    }

    #[inline]
    pub fn epsilon_at(&self, t: u64) -> f64 {
        self.exploration.at(t)
    }

    /// First step from which the temperature stays at its floor.
    pub fn tau_settles_at(&self) -> u64 {
        settle_step(self.tau0, self.tau_floor, self.gamma)
    }

    /// `tau_floor / eps_floor^2`, the small-parameter ratio that should vanish.
    pub fn temperature_exploration_ratio(&self) -> f64 {
        let e = self.exploration.floor();
        self.tau_floor / (e * e)
    }

    pub fn validate(&self) -> Result<()> {
        self.alpha.validate()?;
        check_temperature(self.tau0)?;
        check_temperature(self.tau_floor)?;
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::Schedule(format!("temperature decay rate {} must be finite and nonnegative", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.beta) {
            return Err(Error::Schedule(format!("discount {} outside [0, 1]", self.beta)));
        }
        self.exploration.validate()
    }
}

/// Standard deviation of the Gaussian payoff shock.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma_eta: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec { sigma_eta: 0.01 }
    }
}

impl NoiseSpec {
    pub const NONE: NoiseSpec = NoiseSpec { sigma_eta: 0.0 };

    pub fn validate(&self) -> Result<()> {
        if self.sigma_eta >= 0.0 && self.sigma_eta.is_finite() {
            Ok(())
        } else {
            Err(Error::Config(format!("noise standard deviation {} must be finite and nonnegative", self.sigma_eta)))
        }
    }

    pub(crate) fn distribution(&self) -> Option<Normal<f64>> {
        (self.sigma_eta > 0.0).then(|| Normal::new(0.0, self.sigma_eta).expect("validated sigma"))
    }
}

pub fn noisy_payoff<R: Rng + ?Sized>(u: f64, noise: NoiseSpec, rng: &mut R) -> f64 {
    match noise.distribution() {
        Some(d) => u + d.sample(rng),
        None => u,
    }
}

/// Per-pair visit counts `n(x, m)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VisitCounts {
    k: usize,
    n: Vec<u64>,
}

impl VisitCounts {
    pub fn new(k: usize) -> Self {
        VisitCounts { k, n: vec![0; k * k] }
    }

    #[inline]
    pub fn get(&self, x: usize, m: usize) -> u64 {
        self.n[x * self.k + m]
    }

    /// Records a visit and returns the count before it.
    #[inline]
    pub fn visit(&mut self, x: usize, m: usize) -> u64 {
        let slot = &mut self.n[x * self.k + m];
        let before = *slot;
        *slot += 1;
        before
    }

    pub fn total(&self) -> u64 {
        self.n.iter().sum()
    }
}

/// One observed period: state, message, realized payoff and next state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transition {
    pub x: usize,
    pub m: usize,
    pub u: f64,
    pub x_next: usize,
}

/// `Q(x,m) <- (1 - alpha) Q(x,m) + alpha (u + beta max_m' Q(x_next, m'))`.
pub fn q_update_with(q: &mut QTable, tr: Transition, alpha: f64, beta: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidStepSize(alpha));
    }
    let k = q.k();
    for i in [tr.x, tr.m, tr.x_next] {
        if i >= k {
            return Err(Error::IndexOutOfRange { index: i, len: k });
        }
    }
    let continuation = if beta > 0.0 { beta * q.row_max(tr.x_next).1 } else { 0.0 };
    let old = q.get(tr.x, tr.m);
    q.set(tr.x, tr.m, (1.0 - alpha) * old + alpha * (tr.u + continuation));
    Ok(())
}

/// Applies one update with the step size read off the pair's visit count.
pub fn q_update(q: &mut QTable, tr: Transition, sched: &Schedules, n: &mut VisitCounts) -> Result<()> {
    let alpha = sched.alpha.at(n.get(tr.x, tr.m));
    q_update_with(q, tr, alpha, sched.beta)?;
    n.visit(tr.x, tr.m);
    Ok(())
}

/// Softmax of `q` at `tau`, mixed with exploration weight `epsilon`.
pub fn played_policy(q: &QTable, tau: f64, epsilon: f64) -> Result<ExploredPolicy> {
    explored_policy(&softmax_policy(q, tau)?, epsilon)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn softmax_examples() {
        let q = QTable::filled(4, -0.3);
        let p = softmax_policy(&q, 0.01).unwrap();
        for x in 0..4 {
            for m in 0..4 {
                assert!((p.get(x, m) - 0.25).abs() < 1e-15);
            }
        }

        let q = QTable::new(SquareMatrix::from_rows(&[vec![0.0, -0.1], vec![-0.1, 0.0]]).unwrap()).unwrap();
        let p = softmax_policy(&q, 0.1).unwrap();
        assert!((p.get(0, 0) - 0.7311).abs() < 5e-5);
        assert!((p.get(0, 1) - 0.2689).abs() < 5e-5);
        assert!((p.get(0, 0) - 1.0 / (1.0 + (-1.0f64).exp())).abs() < 1e-15);

        let q = QTable::new(SquareMatrix::from_rows(&[vec![0.0, -1e-3, 1.0], vec![0.0; 3], vec![0.0; 3]]).unwrap()).unwrap();
        let p = softmax_policy(&q, 1e-9).unwrap();
        assert!(p.get(0, 2) >= 1.0 - 1e-6);

        assert!(softmax_policy(&q, 0.0).is_err());
        assert!(softmax_policy(&q, -1.0).is_err());
    }

    #[test]
    fn softmax_survives_tiny_temperature() {
        let q = QTable::new(SquareMatrix::from_rows(&[vec![-1.0, -1.2], vec![-4.0, -3.9]]).unwrap()).unwrap();
        let p = softmax_policy(&q, 1e-4).unwrap();
        assert_eq!(p.get(0, 0), 1.0);
        assert_eq!(p.get(1, 1), 1.0);
        assert!(p.matrix().as_slice().iter().all(|v| v.is_finite()));
    }

    #[test]
    fn sampling_deterministic_row() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mu = Policy::pure(&[2, 0, 1]).unwrap();
        let mubar = explored_policy(&mu, 0.0).unwrap();
        for _ in 0..1000 {
            assert_eq!(sample_message(0, &mubar, &mut rng), 2);
            assert_eq!(sample_message(1, &mubar, &mut rng), 0);
        }
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.9999999999999999), 1);
        assert_eq!(sample_index(&[0.5, 0.5 - 1e-17, 0.0], 0.9999999999999999), 1);
    }

    #[test]
    fn sampling_uniform_frequencies() {
        let k = 7;
        let n = 1_000_000;
        let mubar = explored_policy(&Policy::babbling(k), 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let mut counts = vec![0u64; k];
        for _ in 0..n {
            counts[sample_message(3, &mubar, &mut rng)] += 1;
        }
        let p = 1.0 / k as f64;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        for c in counts {
            assert!((c as f64 - n as f64 * p).abs() < 5.0 * sd, "count {c}");
        }
    }

    #[test]
    fn sampling_is_reproducible() {
        let mubar = explored_policy(&Policy::babbling(5), 0.2).unwrap();
        let draw = |seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..100).map(|_| sample_message(1, &mubar, &mut rng)).collect::<Vec<_>>()
        };
        assert_eq!(draw(7), draw(7));
        assert_ne!(draw(7), draw(8));
    }

    #[test]
    fn update_examples() {
        let sched = Schedules { alpha: StepSize::Constant(0.05), ..Schedules::default() };
        let mut q = QTable::filled(3, 0.0);
        let mut n = VisitCounts::new(3);
        q_update(&mut q, Transition { x: 1, m: 2, u: -0.25, x_next: 0 }, &sched, &mut n).unwrap();
        assert!((q.get(1, 2) + 0.0125).abs() < 1e-15);
        let changed = q.matrix().as_slice().iter().filter(|v| **v != 0.0).count();
        assert_eq!(changed, 1);
        assert_eq!(n.get(1, 2), 1);
        assert_eq!(n.total(), 1);

        let mut q = QTable::filled(3, -0.7);
        q_update_with(&mut q, Transition { x: 0, m: 0, u: -0.3, x_next: 1 }, 1.0, 0.0).unwrap();
        assert_eq!(q.get(0, 0), -0.3);

        let mut q = QTable::filled(3, 0.0);
        for m in 0..3 {
            q.set(2, m, -0.2 - 0.1 * m as f64);
        }
        q_update_with(&mut q, Transition { x: 0, m: 1, u: -0.25, x_next: 2 }, 0.5, 0.9).unwrap();
        assert!((q.get(0, 1) + 0.215).abs() < 1e-15);

        assert!(q_update_with(&mut q, Transition { x: 0, m: 1, u: 0.0, x_next: 2 }, 0.0, 0.0).is_err());
        assert!(q_update_with(&mut q, Transition { x: 0, m: 1, u: 0.0, x_next: 2 }, 1.5, 0.0).is_err());
        assert!(q_update_with(&mut q, Transition { x: 3, m: 1, u: 0.0, x_next: 2 }, 0.5, 0.0).is_err());
    }

    #[test]
    fn discount_ties_use_lowest_index() {
        let mut q = QTable::filled(2, -0.5);
        assert_eq!(q.row_max(1), (0, -0.5));
        q.set(1, 1, -0.1);
        assert_eq!(q.row_max(1), (1, -0.1));
    }

    #[test]
    fn robbins_monro_step_uses_visit_count() {
        let sched = Schedules { alpha: StepSize::THEORY, ..Schedules::default() };
        let mut q = QTable::filled(2, 0.0);
        let mut n = VisitCounts::new(2);
        for i in 0..4 {
            q_update(&mut q, Transition { x: 0, m: 0, u: -(i as f64), x_next: 0 }, &sched, &mut n).unwrap();
        }
        // With a/(n+c) = 1/(n+1) the estimate is the running mean of the payoffs.
        assert!((q.get(0, 0) + 1.5).abs() < 1e-15);
    }

    #[test]
    fn noise_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        assert_eq!(noisy_payoff(-0.3, NoiseSpec::NONE, &mut rng), -0.3);
        let n = 1_000_000;
        let spec = NoiseSpec { sigma_eta: 0.1 };
        let draws: Vec<f64> = (0..n).map(|_| noisy_payoff(-0.3, spec, &mut rng)).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean + 0.3).abs() < 5.0 * 0.1 / (n as f64).sqrt());
        assert!((var.sqrt() - 0.1).abs() < 1e-3);
    }

    #[test]
    fn init_modes() {
        let g = StateGrid::new(3).unwrap();
        let q = init_qtable(&InitMode::Babbling, &g, Bias::ZERO).unwrap();
        let expected = [[-0.25; 3], [0.0; 3], [-0.25; 3]];
        for x in 0..3 {
            assert_eq!(q.row(x), &expected[x]);
        }
        let q = init_qtable(&InitMode::FullRevelation { delta: 1.0 }, &g, Bias::ZERO).unwrap();
        for x in 0..3 {
            for m in 0..3 {
                assert_eq!(q.get(x, m), if x == m { 0.0 } else { -1.0 });
            }
        }
        let q = init_qtable(&InitMode::Constant(0.0), &g, Bias::ZERO).unwrap();
        let p = softmax_policy(&q, 0.1).unwrap();
        assert_eq!(p, Policy::babbling(3));

        let bad = SquareMatrix::filled(2, 0.0);
        assert!(init_qtable(&InitMode::Custom(bad), &g, Bias::ZERO).is_err());
        let nan = SquareMatrix::from_fn(3, |x, _| if x == 1 { f64::NAN } else { 0.0 });
        assert!(init_qtable(&InitMode::Custom(nan), &g, Bias::ZERO).is_err());
    }

    #[test]
    fn revelation_init_is_nearly_pure_at_default_temperature() {
        let g = StateGrid::new(21).unwrap();
        let q = init_qtable(&InitMode::FullRevelation { delta: 1.0 }, &g, Bias::ZERO).unwrap();
        let p = softmax_policy(&q, Schedules::default().tau0).unwrap();
        for x in 0..21 {
            assert!(p.get(x, x) > 0.999);
        }
    }

    #[test]
    fn temperature_schedule() {
        let s = Schedules { tau0: 1.0, tau_floor: 1e-4, gamma: 1e-3, ..Schedules::default() };
        assert_eq!(s.tau_at(0), 1.0);
        assert!((s.tau_at(1000) - (-1.0f64).exp()).abs() < 1e-15);
        assert_eq!(s.tau_at(1_000_000), 1e-4);
        let settle = s.tau_settles_at();
        assert_eq!(s.tau_at(settle), 1e-4);
        assert!(s.tau_at(settle - 1) > 1e-4);
        let mut prev = f64::INFINITY;
        for t in (0..20_000).step_by(7) {
            let tau = s.tau_at(t);
            assert!(tau <= prev);
            prev = tau;
        }
        assert!((s.temperature_exploration_ratio() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn exploration_schedule() {
        let e = Exploration::Exponential { eps0: 0.5, floor: 1e-3, rate: 1e-2 };
        assert_eq!(e.at(0), 0.5);
        assert_eq!(e.at(10_000), 1e-3);
        assert_eq!(e.at(e.settles_at()), 1e-3);
        assert!(Exploration::Constant(1.0).validate().is_err());
    }

    #[test]
    fn schedule_validation() {
        assert!(Schedules::default().validate().is_ok());
        assert!(Schedules { tau_floor: 0.0, ..Schedules::default() }.validate().is_err());
        assert!(Schedules { beta: 1.5, ..Schedules::default() }.validate().is_err());
        assert!(StepSize::Constant(0.0).validate().is_err());
        assert!(StepSize::RobbinsMonro { a: 2.0, c: 1.0 }.validate().is_err());
        assert!(StepSize::Polynomial { a: 1.0, q: 0.5 }.validate().is_err());
        assert!(StepSize::Polynomial { a: 1.0, q: 0.7 }.validate().is_ok());
    }

    fn arb_row(k: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-2.0f64..0.0, k)
    }

    proptest! {
        #[test]
        fn softmax_shift_invariant(row in arb_row(6), c in -5.0f64..5.0, tau in 1e-3f64..1.0) {
            let mut a = vec![0.0; 6];
            let mut b = vec![0.0; 6];
            softmax_row(&row, tau, &mut a);
            let shifted: Vec<f64> = row.iter().map(|v| v + c).collect();
            softmax_row(&shifted, tau, &mut b);
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p - q).abs() < 1e-12);
            }
            prop_assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn softmax_monotone(row in arb_row(5), i in 0usize..5, bump in 1e-3f64..0.5, tau in 0.05f64..1.0) {
            let mut before = vec![0.0; 5];
            let mut after = vec![0.0; 5];
            softmax_row(&row, tau, &mut before);
            let mut raised = row.clone();
            raised[i] += bump;
            softmax_row(&raised, tau, &mut after);
            prop_assert!(after[i] > before[i]);
            for j in (0..5).filter(|&j| j != i) {
                prop_assert!(after[j] < before[j]);
            }
        }

        #[test]
        fn updates_stay_in_payoff_range(
            seed in 0u64..10_000,
            b in 0.0f64..0.3,
            steps in 1usize..400,
        ) {
            let k = 5;
            let g = StateGrid::new(k).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut q = init_qtable(&InitMode::Babbling, &g, Bias::new(b).unwrap()).unwrap();
            let sched = Schedules::default();
            let mut n = VisitCounts::new(k);
            let lo = -(1.0 + b) * (1.0 + b);
            for _ in 0..steps {
                let x = rng.gen_range(0..k);
                let m = rng.gen_range(0..k);
                let y: f64 = rng.gen_range(0.0..=1.0);
                let before = q.clone();
                let u = sender_payoff(g.state(x), y, b);
                q_update(&mut q, Transition { x, m, u, x_next: rng.gen_range(0..k) }, &sched, &mut n).unwrap();
                let diffs = before.matrix().as_slice().iter().zip(q.matrix().as_slice()).filter(|(a, b)| a != b).count();
                prop_assert!(diffs <= 1);
            }
            prop_assert!(q.matrix().as_slice().iter().all(|v| (lo..=0.0).contains(v)));
            prop_assert_eq!(n.total(), steps as u64);
        }
    }
}
