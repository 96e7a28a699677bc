//! Limiting ODEs of the learning process and their rest-point stability.

mod integrate;
mod saps;
mod stability;
mod starts;

pub use integrate::{integrate, StepControl, Trajectory};
pub use saps::{check_unused_message_posterior, saps_fixed_point, saps_gap, SapsSolution};
pub use starts::{perturb, start_state, OdeStart, INTERIOR_FLOOR};
pub use stability::{
    classify, eigenvalues, fd_jacobian, find_rest_point, jacobian, Classification, RestPointOptions, RestPointReport, ZERO_BAND,
};

use crate::error::{Error, Result};
use crate::game::{check_epsilon, Bias, StateGrid};
use crate::matrix::SquareMatrix;
use crate::sender::{check_temperature, softmax_row};

/// Policy entries at or below this value are outside the policy ODE's domain.
pub const POLICY_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Flow on Q-values: `dQ = mubar * (u(Q) - Q)`.
    QValues,
    /// Flow on policies with entropy-perturbed payoffs `u - tau ln mu`.
    Policy,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSystem {
    pub grid: StateGrid,
    pub b: Bias,
    pub tau: f64,
    pub epsilon: f64,
    pub variant: Variant,
}

impl OdeSystem {
    pub fn new(grid: StateGrid, b: Bias, tau: f64, epsilon: f64, variant: Variant) -> Result<Self> {
        check_temperature(tau)?;
        check_epsilon(epsilon)?;
        if epsilon <= 0.0 {
            return Err(Error::InvalidEpsilon(epsilon));
        }
        Ok(OdeSystem { grid, b, tau, epsilon, variant })
    }

    pub fn k(&self) -> usize {
        self.grid.k()
    }

    /// Payoffs `u(x, m) = -(x + b - y(m))^2` against the receiver's best response to `mu`.
    pub fn payoffs_for_policy(&self, mu: &SquareMatrix) -> SquareMatrix {
        let k = self.k();
        let eps = self.epsilon;
        let floor = eps / k as f64;
        let mut mass = vec![0.0; k];
        let mut weighted = vec![0.0; k];
        for x in 0..k {
            let s = self.grid.state(x);
            for (m, &p) in mu.row(x).iter().enumerate() {
                let pbar = (1.0 - eps) * p + floor;
                mass[m] += pbar;
                weighted[m] += s * pbar;
            }
        }
        let y: Vec<f64> = mass
            .iter()
            .zip(&weighted)
            .map(|(&z, &w)| if z > 0.0 { w / z } else { 0.5 })
            .collect();
        let b = self.b.value();
        SquareMatrix::from_fn(k, |x, m| {
            let d = self.grid.state(x) + b - y[m];
            -d * d
        })
    }

    /// Softmax of `q` at the system temperature.
    pub fn policy_of(&self, q: &SquareMatrix) -> SquareMatrix {
        let k = self.k();
        let mut mu = SquareMatrix::zeros(k);
        for x in 0..k {
            softmax_row(q.row(x), self.tau, mu.row_mut(x));
        }
        mu
    }

    /// `U(Q)`: payoffs induced by the softmax policy of `q`.
    pub fn payoff_map(&self, q: &SquareMatrix) -> SquareMatrix {
        self.payoffs_for_policy(&self.policy_of(q))
    }

    /// The logit response to `mu`: softmax of its payoffs at the system temperature.
    pub fn logit_response(&self, mu: &SquareMatrix) -> SquareMatrix {
        self.policy_of(&self.payoffs_for_policy(mu))
    }

    /// Right-hand side of the active variant.
    pub fn rhs(&self, state: &SquareMatrix) -> Result<SquareMatrix> {
        match self.variant {
            Variant::QValues => Ok(q_ode_rhs(state, self)),
            Variant::Policy => policy_ode_rhs(state, self),
        }
    }

    /// Maps a state of the active variant to the policy it represents.
    pub fn as_policy(&self, state: &SquareMatrix) -> SquareMatrix {
        match self.variant {
            Variant::QValues => self.policy_of(state),
            Variant::Policy => state.clone(),
        }
    }
}

/// `dQ(x,m) = mubar(x,m) (u(x,m,Q) - Q(x,m))`.
pub fn q_ode_rhs(q: &SquareMatrix, sys: &OdeSystem) -> SquareMatrix {
    let mu = sys.policy_of(q);
    let u = sys.payoffs_for_policy(&mu);
    let eps = sys.epsilon;
    let floor = eps / sys.k() as f64;
    let mut out = u;
    for ((o, &p), &qv) in out.as_mut_slice().iter_mut().zip(mu.as_slice()).zip(q.as_slice()) {
        *o = ((1.0 - eps) * p + floor) * (*o - qv);
    }
    out
}

/// `dmu(x,m) = mu(x,m) (uH(x,m) - sum_m' mu(x,m') uH(x,m'))` with `uH = u - tau ln mu`.
pub fn policy_ode_rhs(mu: &SquareMatrix, sys: &OdeSystem) -> Result<SquareMatrix> {
    for (x, row) in mu.rows().enumerate() {
        if let Some(m) = row.iter().position(|&p| !(p > POLICY_FLOOR)) {
            return Err(Error::InvalidEntry { row: x, col: m, value: row[m] });
        }
    }
    let mut out = sys.payoffs_for_policy(mu);
    for x in 0..sys.k() {
        let p = mu.row(x);
        let row = out.row_mut(x);
        for (h, &pi) in row.iter_mut().zip(p) {
            *h -= sys.tau * pi.ln();
        }
        let avg: f64 = row.iter().zip(p).map(|(h, pi)| h * pi).sum();
        for (h, &pi) in row.iter_mut().zip(p) {
            *h = pi * (*h - avg);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sender::{init_qtable, InitMode};
    use proptest::prelude::*;

    fn system(k: usize, b: f64, variant: Variant) -> OdeSystem {
        OdeSystem::new(StateGrid::new(k).unwrap(), Bias::new(b).unwrap(), 1e-3, 1e-2, variant).unwrap()
    }

    #[test]
    fn rejects_degenerate_parameters() {
        let g = StateGrid::new(5).unwrap();
        assert!(OdeSystem::new(g.clone(), Bias::ZERO, 0.0, 0.1, Variant::QValues).is_err());
        assert!(OdeSystem::new(g, Bias::ZERO, 0.1, 0.0, Variant::QValues).is_err());
    }

    #[test]
    fn self_consistent_q_is_at_rest() {
        let sys = system(5, 0.0, Variant::QValues);
        let q = init_qtable(&InitMode::Babbling, &sys.grid, sys.b).unwrap().into_matrix();
        assert!(q_ode_rhs(&q, &sys).sup_norm() < 1e-15);

        // Any Q whose rows are its own induced payoffs is a rest point.
        let mu = SquareMatrix::filled(5, 0.2);
        let u = sys.payoffs_for_policy(&mu);
        assert!(q_ode_rhs(&u, &sys).sup_norm() < 1e-15);
    }

    #[test]
    fn raising_one_babbling_entry_is_reinforced() {
        let sys = system(5, 0.0, Variant::QValues);
        let mut q = init_qtable(&InitMode::Babbling, &sys.grid, sys.b).unwrap().into_matrix();
        q[(0, 1)] += 1e-3;
        let rhs = q_ode_rhs(&q, &sys);
        // The boosted entry sits above the prior-mean payoff, but the message now
        // points toward state 0, lifting its payoff further above Q.
        assert!(rhs[(0, 1)] > 0.0, "{}", rhs[(0, 1)]);
    }

    #[test]
    fn policy_rhs_rejects_boundary() {
        let sys = system(3, 0.0, Variant::Policy);
        let mu = SquareMatrix::from_fn(3, |_, m| if m == 0 { 1.0 } else { 0.0 });
        assert!(policy_ode_rhs(&mu, &sys).is_err());
    }

    #[test]
    fn uniform_policy_with_flat_payoffs_rests() {
        let sys = system(5, 0.0, Variant::Policy);
        let rhs = policy_ode_rhs(&SquareMatrix::filled(5, 0.2), &sys).unwrap();
        assert!(rhs.sup_norm() < 1e-15);
    }

    proptest! {
        #[test]
        fn policy_rhs_is_tangent(raw in proptest::collection::vec(0.01f64..1.0, 36), b in 0.0f64..0.3) {
            let sys = system(6, b, Variant::Policy);
            let mut mu = SquareMatrix::from_vec(6, raw).unwrap();
            for x in 0..6 {
                let s: f64 = mu.row(x).iter().sum();
                mu.row_mut(x).iter_mut().for_each(|v| *v /= s);
            }
            let rhs = policy_ode_rhs(&mu, &sys).unwrap();
            for row in rhs.rows() {
                prop_assert!(row.iter().sum::<f64>().abs() < 1e-12);
            }
        }
    }
}
