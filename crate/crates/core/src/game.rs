//! The discretized quadratic cheap-talk game.
//!
//! States and messages share the grid `{0, 1/(K-1), ..., 1}` with a uniform
//! prior. A sender policy is a row-stochastic `K x K` matrix (rows are states,
//! columns are messages); the receiver best-responds with the posterior mean.

use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

/// Row sums of a policy must match 1 within this tolerance.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// The state (and message) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StateGrid {
    states: Vec<f64>,
    mean: f64,
}

impl StateGrid {
    pub fn new(k: usize) -> Result<Self> {
        if k < 2 {
            return Err(Error::GridTooSmall(k));
        }
        let last = (k - 1) as f64;
        let states: Vec<f64> = (0..k).map(|i| i as f64 / last).collect();
        let mean = states.iter().sum::<f64>() / k as f64;
        Ok(StateGrid { states, mean })
    }

    #[inline]
    pub fn k(&self) -> usize {
        self.states.len()
    }

    #[inline]
    pub fn states(&self) -> &[f64] {
        &self.states
    }

    #[inline]
    pub fn state(&self, i: usize) -> f64 {
        self.states[i]
    }

    pub fn spacing(&self) -> f64 {
        1.0 / (self.k() - 1) as f64
    }

    /// Prior mean of the state, summed over the grid (1/2 up to rounding).
    #[inline]
    pub fn prior_mean(&self) -> f64 {
        self.mean
    }

    /// Index of the state 1/2, present only on odd grids.
    pub fn middle(&self) -> Option<usize> {
        (self.k() % 2 == 1).then(|| self.k() / 2)
    }

    pub fn require_odd(&self) -> Result<usize> {
        self.middle().ok_or(Error::EvenGrid(self.k()))
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i < self.k() {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index: i,
                len: self.k(),
            })
        }
    }
}

/// Sender bias `b >= 0`, measured in units of the state space.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Bias(f64);

impl Bias {
    pub const ZERO: Bias = Bias(0.0);

    pub fn new(b: f64) -> Result<Self> {
        if b.is_finite() && b >= 0.0 {
            Ok(Bias(b))
        } else {
            Err(Error::InvalidBias(b))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// Whether the bias exceeds half a grid step, the level above which
    /// no equilibrium of the static game is learnable.
    pub fn is_effective(self, grid: &StateGrid) -> bool {
        self.0 > effective_bias_threshold(grid)
    }
}

/// `1 / (2 (K - 1))`.
pub fn effective_bias_threshold(grid: &StateGrid) -> f64 {
    0.5 / (grid.k() - 1) as f64
}

/// A sender messaging strategy `mu(x, m)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Policy(SquareMatrix);

impl Policy {
    /// Validates entries in `[0, 1]` and row sums within [`STOCHASTIC_TOL`].
    pub fn new(matrix: SquareMatrix) -> Result<Self> {
        for (x, row) in matrix.rows().enumerate() {
            for (m, &v) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&v) {
                    return Err(Error::InvalidEntry {
                        row: x,
                        col: m,
                        value: v,
                    });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::NotStochastic { row: x, sum });
            }
        }
        Ok(Policy(matrix))
    }

    /// Wraps a matrix the caller has already normalized.
    pub(crate) fn from_matrix_unchecked(matrix: SquareMatrix) -> Self {
        Policy(matrix)
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let matrix = SquareMatrix::from_rows(rows).ok_or(Error::Dimension {
            expected: rows.len(),
            actual: rows.first().map_or(0, Vec::len),
        })?;
        Policy::new(matrix)
    }

    /// Every state mixes uniformly over all messages.
    pub fn babbling(k: usize) -> Self {
        Policy(SquareMatrix::filled(k, 1.0 / k as f64))
    }

    /// State `x` sends message `x`.
    pub fn fully_revealing(k: usize) -> Self {
        Policy(SquareMatrix::from_fn(k, |x, m| if x == m { 1.0 } else { 0.0 }))
    }

    /// A pure policy: state `x` sends `messages[x]` with certainty.
    pub fn pure(messages: &[usize]) -> Result<Self> {
        let k = messages.len();
        if let Some(&bad) = messages.iter().find(|&&m| m >= k) {
            return Err(Error::IndexOutOfRange { index: bad, len: k });
        }
        Ok(Policy(SquareMatrix::from_fn(k, |x, m| {
            if messages[x] == m {
                1.0
            } else {
                0.0
            }
        })))
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
    pub fn row(&self, x: usize) -> &[f64] {
        self.0.row(x)
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> SquareMatrix {
        self.0
    }

    pub fn sup_distance(&self, other: &Policy) -> f64 {
        self.0.sup_distance(&other.0)
    }

    /// Relabels messages: column `m` of the result is column `perm[m]` of `self`.
    pub fn relabel(&self, perm: &[usize]) -> Policy {
        Policy(self.0.permute_columns(perm))
    }
}

/// The exploration mixture `(1 - eps) mu + eps / K` actually played.
#[derive(Debug, Clone, PartialEq)]
pub struct ExploredPolicy {
    base: Policy,
    epsilon: f64,
    mixed: SquareMatrix,
}

impl ExploredPolicy {
    pub fn base(&self) -> &Policy {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    #[inline]
    pub fn get(&self, x: usize, m: usize) -> f64 {
        self.mixed[(x, m)]
    }

    #[inline]
    pub fn row(&self, x: usize) -> &[f64] {
        self.mixed.row(x)
    }

    pub fn k(&self) -> usize {
        self.mixed.dim()
    }

    pub fn matrix(&self) -> &SquareMatrix {
        &self.mixed
    }
}

pub fn check_epsilon(epsilon: f64) -> Result<()> {
    if (0.0..1.0).contains(&epsilon) {
        Ok(())
    } else {
        Err(Error::InvalidEpsilon(epsilon))
    }
}

pub fn explored_policy(mu: &Policy, epsilon: f64) -> Result<ExploredPolicy> {
    check_epsilon(epsilon)?;
    let k = mu.k();
    let floor = epsilon / k as f64;
    let mut mixed = mu.matrix().clone();
    if epsilon > 0.0 {
        for v in mixed.as_mut_slice() {
            *v = (1.0 - epsilon) * *v + floor;
        }
    }
    Ok(ExploredPolicy {
        base: mu.clone(),
        epsilon,
        mixed,
    })
}

/// Quadratic sender utility `-(y - x - b)^2`.
#[inline]
pub fn sender_payoff(x: f64, y: f64, b: f64) -> f64 {
    let d = y - x - b;
    -d * d
}

/// Quadratic receiver utility `-(y - x)^2`.
#[inline]
pub fn receiver_payoff(x: f64, y: f64) -> f64 {
    sender_payoff(x, y, 0.0)
}

/// Receiver action after one message.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub mean: f64,
    /// The message had zero probability; `mean` is the prior mean.
    pub degenerate: bool,
}

pub fn posterior_mean(mubar: &ExploredPolicy, m: usize, grid: &StateGrid) -> Result<Posterior> {
    if mubar.k() != grid.k() {
        return Err(Error::Dimension {
            expected: grid.k(),
            actual: mubar.k(),
        });
    }
    grid.check_index(m)?;
    let (mut mass, mut weighted) = (0.0, 0.0);
    for (x, &s) in grid.states().iter().enumerate() {
        let p = mubar.get(x, m);
        mass += p;
        weighted += s * p;
    }
    Ok(posterior_from_sums(mass, weighted))
}

#[inline]
pub(crate) fn posterior_from_sums(mass: f64, weighted: f64) -> Posterior {
    if mass > 0.0 {
        Posterior {
            mean: weighted / mass,
            degenerate: false,
        }
    } else {
        Posterior {
            mean: 0.5,
            degenerate: true,
        }
    }
}

/// Receiver actions `y(m)`, one per message.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverResponse {
    pub y: Vec<f64>,
    /// Messages with zero probability, answered with the prior mean.
    pub degenerate: Vec<usize>,
}

impl ReceiverResponse {
    pub fn constant(k: usize, y: f64) -> Self {
        ReceiverResponse {
            y: vec![y; k],
            degenerate: Vec::new(),
        }
    }
}

pub fn best_response(mubar: &ExploredPolicy, grid: &StateGrid) -> Result<ReceiverResponse> {
    let k = grid.k();
    if mubar.k() != k {
        return Err(Error::Dimension {
            expected: k,
            actual: mubar.k(),
        });
    }
    let mut mass = vec![0.0; k];
    let mut weighted = vec![0.0; k];
    for (x, &s) in grid.states().iter().enumerate() {
        for (m, &p) in mubar.row(x).iter().enumerate() {
            mass[m] += p;
            weighted[m] += s * p;
        }
    }
    let mut y = Vec::with_capacity(k);
    let mut degenerate = Vec::new();
    for m in 0..k {
        let post = posterior_from_sums(mass[m], weighted[m]);
        if post.degenerate {
            degenerate.push(m);
        }
        y.push(post.mean);
    }
    Ok(ReceiverResponse { y, degenerate })
}

fn expected_payoff(
    mu_play: &ExploredPolicy,
    y: &ReceiverResponse,
    b: f64,
    grid: &StateGrid,
) -> Result<f64> {
    let k = grid.k();
    if mu_play.k() != k || y.y.len() != k {
        return Err(Error::Dimension {
            expected: k,
            actual: y.y.len().min(mu_play.k()),
        });
    }
    let mut total = 0.0;
    for (x, &s) in grid.states().iter().enumerate() {
        for (m, &p) in mu_play.row(x).iter().enumerate() {
            if p > 0.0 {
                total += p * sender_payoff(s, y.y[m], b);
            }
        }
    }
    Ok(total / k as f64)
}

/// Ex-ante sender utility under the played policy and receiver actions.
pub fn expected_sender_payoff(
    mu_play: &ExploredPolicy,
    y: &ReceiverResponse,
    b: Bias,
    grid: &StateGrid,
) -> Result<f64> {
    expected_payoff(mu_play, y, b.value(), grid)
}

pub fn expected_receiver_payoff(
    mu_play: &ExploredPolicy,
    y: &ReceiverResponse,
    grid: &StateGrid,
) -> Result<f64> {
    expected_payoff(mu_play, y, 0.0, grid)
}

/// Variance of the uniform prior on the grid, `(K + 1) / (12 (K - 1))`.
pub fn prior_variance(grid: &StateGrid) -> f64 {
    let k = grid.k() as f64;
    (k + 1.0) / (12.0 * (k - 1.0))
}

/// Expected squared distance between the state and the receiver's posterior mean.
pub fn residual_variance(mubar: &ExploredPolicy, grid: &StateGrid) -> Result<f64> {
    let response = best_response(mubar, grid)?;
    Ok(-expected_receiver_payoff(mubar, &response, grid)?)
}

/// Normalized informativeness: `1 - E[(X - E[X|m])^2] / Var(X)`, computed on
/// the exploration mixture with weight `epsilon`.
pub fn welfare(mu: &Policy, epsilon: f64, grid: &StateGrid) -> Result<f64> {
    let mubar = explored_policy(mu, epsilon)?;
    welfare_of_played(&mubar, grid)
}

pub fn welfare_of_played(mubar: &ExploredPolicy, grid: &StateGrid) -> Result<f64> {
    let residual = residual_variance(mubar, grid)?;
    Ok((1.0 - residual / prior_variance(grid)).clamp(0.0, 1.0))
}
