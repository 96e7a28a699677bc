use crate::error::{Error, Result};
use crate::game::{check_epsilon, Policy, StateGrid};
use crate::sender::softmax_row;

/// Largest `|y(m) - 1/2|` over messages that are not a row maximizer of `mu`.
///
/// With `tau > 0` the policy is first softened to `softmax(mu / tau)`, giving
/// never-chosen messages the tail mass `exp(-1/tau)` relative to chosen ones.
/// Messages without any mass are treated as answered by the prior mean.
/// Returns `None` if every message is a maximizer somewhere.
pub fn check_unused_message_posterior(mu: &Policy, epsilon: f64, tau: f64, grid: &StateGrid) -> Result<Option<f64>> {
    check_epsilon(epsilon)?;
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::InvalidTemperature(tau));
    }
    let k = grid.k();
    if mu.k() != k {
        return Err(Error::Dimension { expected: k, actual: mu.k() });
    }
    let mut used = vec![false; k];
    for x in 0..k {
        let row = mu.row(x);
        let top = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (m, &p) in row.iter().enumerate() {
            if p == top {
                used[m] = true;
            }
        }
    }
    let unused: Vec<usize> = (0..k).filter(|&m| !used[m]).collect();
    if unused.is_empty() {
        return Ok(None);
    }
    let mut soft = vec![0.0; k * k];
    for x in 0..k {
        let out = &mut soft[x * k..(x + 1) * k];
        if tau > 0.0 {
            softmax_row(mu.row(x), tau, out);
        } else {
            out.copy_from_slice(mu.row(x));
        }
    }
    let floor = epsilon / k as f64;
    let mut worst = 0.0f64;
    for &m in &unused {
        let (mut mass, mut centered) = (0.0, 0.0);
        for x in 0..k {
            let p = (1.0 - epsilon) * soft[x * k + m];
            mass += p + floor;
            // The uniform exploration part is centered at 1/2 and drops out.
            centered += (grid.state(x) - 0.5) * p;
        }
        if mass > 0.0 {
            worst = worst.max((centered / mass).abs());
        }
    }
    Ok(Some(worst))
}

struct SapsGeometry {
    m: f64,
    scale: f64,
    xbar: f64,
}

impl SapsGeometry {
    fn new(m: usize, k: usize) -> Result<Self> {
        if m < 3 || 2 * m - 2 > k {
            return Err(Error::BadPartition { sizes: vec![m, m.saturating_sub(2)], k });
        }
        let last = (k - 1) as f64;
        Ok(SapsGeometry { m: m as f64, scale: (m as f64 - 1.0) / (2.0 * last), xbar: (m as f64 - 1.0) / last })
    }

    /// `v1 - v2`: squared distance from the boundary state to the larger pool's
    /// action minus that to the smaller pool's action, when the boundary state
    /// sends the larger pool's message with probability `mu`.
    fn gap(&self, mu: f64, eps: f64) -> f64 {
        let SapsGeometry { m, scale, xbar } = *self;
        let e1 = xbar - scale * m / (m - 1.0 + mu);
        let e2 = xbar + scale * (m - 2.0) / (m - 1.0 - mu);
        let d1 = scale * m / (m - 1.0 + mu) - eps * (0.5 - e1) / ((1.0 - eps) * (m - 1.0 + mu) + eps);
        let d2 = scale * (m - 2.0) / (m - 1.0 - mu) + eps * (0.5 - e2) / ((1.0 - eps) * (m - 1.0 - mu) + eps);
        d1 * d1 - d2 * d2
    }
}

/// The payoff gap `Delta(mu)` between a pool of size `m` at the bottom of the
/// grid and the adjacent pool of size `m - 2`, seen from the larger pool's top state.
pub fn saps_gap(mu: f64, m: usize, k: usize, epsilon: f64) -> Result<f64> {
    check_epsilon(epsilon)?;
    Ok(SapsGeometry::new(m, k)?.gap(mu, epsilon))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SapsSolution {
    pub mu: f64,
    pub gap_at_zero: f64,
    pub iterations: usize,
}

/// `1 / (1 + exp(z))` without overflow.
fn logistic_tail(z: f64) -> f64 {
    if z > 0.0 {
        let e = (-z).exp();
        e / (1.0 + e)
    } else {
        1.0 / (1.0 + z.exp())
    }
}

/// Solves `mu = 1 / (1 + exp(Delta(mu) / tau))` on `[0, 1/2]` by bisection,
/// refining until the bracket cannot shrink further in double precision.
pub fn saps_fixed_point(m: usize, k: usize, epsilon: f64, tau: f64) -> Result<SapsSolution> {
    check_epsilon(epsilon)?;
    if !(tau > 0.0) {
        return Err(Error::InvalidTemperature(tau));
    }
    let geo = SapsGeometry::new(m, k)?;
    let f = |mu: f64| mu - logistic_tail(geo.gap(mu, epsilon) / tau);
    let (mut lo, mut hi) = (0.0f64, 0.5f64);
    let (flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Ok(SapsSolution { mu: 0.0, gap_at_zero: geo.gap(0.0, epsilon), iterations: 0 });
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoBracket { lo, hi });
    }
    let mut iterations = 0;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        iterations += 1;
        if f(mid).signum() == flo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(SapsSolution { mu: 0.5 * (lo + hi), gap_at_zero: geo.gap(0.0, epsilon), iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pooled_k5() -> Policy {
        Policy::pure(&[0, 0, 1, 1, 1]).unwrap()
    }

    #[test]
    fn unused_posteriors_near_prior() {
        let g = StateGrid::new(5).unwrap();
        let dev = check_unused_message_posterior(&pooled_k5(), 0.1, 0.01, &g).unwrap().unwrap();
        assert!(dev < 0.01, "{dev}");
        // Identical tails in every row leave only rounding error.
        for tau in [0.05, 0.02, 0.01] {
            let d = check_unused_message_posterior(&pooled_k5(), 0.1, tau, &g).unwrap().unwrap();
            assert!(d < 1e-15);
        }
    }

    #[test]
    fn deviation_shrinks_with_temperature() {
        // Low states commit less, so they leak more tail mass onto unused messages.
        let g = StateGrid::new(5).unwrap();
        let mu = Policy::from_rows(&[
            vec![0.9, 0.1, 0.0, 0.0, 0.0],
            vec![0.8, 0.2, 0.0, 0.0, 0.0],
            vec![0.3, 0.7, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0, 0.0, 0.0],
        ])
        .unwrap();
        let devs: Vec<f64> = [0.05, 0.02, 0.01]
            .iter()
            .map(|&tau| check_unused_message_posterior(&mu, 0.1, tau, &g).unwrap().unwrap())
            .collect();
        assert!(devs[0] > 0.0 && devs[0] < 0.01);
        assert!(devs[1] < devs[0] && devs[2] < devs[1], "{devs:?}");
    }

    #[test]
    fn exact_zero_columns_are_degenerate() {
        let g = StateGrid::new(5).unwrap();
        assert_eq!(check_unused_message_posterior(&pooled_k5(), 0.0, 0.0, &g).unwrap(), Some(0.0));
        assert_eq!(check_unused_message_posterior(&Policy::fully_revealing(5), 0.1, 0.01, &g).unwrap(), None);
    }

    #[test]
    fn soft_tails_with_asymmetric_mass() {
        // Message 2 carries small mass from the low states only.
        let g = StateGrid::new(3).unwrap();
        let mu = Policy::from_rows(&[vec![0.9, 0.0, 0.1], vec![0.95, 0.0, 0.05], vec![0.0, 1.0, 0.0]]).unwrap();
        let dev = check_unused_message_posterior(&mu, 0.3, 0.0, &g).unwrap().unwrap();
        // Direct Bayes: weights 0.7*0.1+0.1, 0.7*0.05+0.1, 0.1 on states 0, 1/2, 1.
        let w = [0.17, 0.135, 0.1];
        let y = (0.0 * w[0] + 0.5 * w[1] + 1.0 * w[2]) / w.iter().sum::<f64>();
        assert!((dev - (y - 0.5).abs()).abs() < 1e-12);
    }

    #[test]
    fn gap_positive_at_zero() {
        let d = saps_gap(0.0, 4, 21, 1e-3).unwrap();
        // Oracle without exploration: the boundary state 0.15 joins {0.2, 0.25},
        // mean 0.2, while the remaining pool {0, 0.05, 0.1} has mean 0.05.
        let v1 = (0.15f64 - 0.05).powi(2);
        let v2 = (0.2f64 - 0.15).powi(2);
        assert!((d - (v1 - v2)).abs() < 1e-4);
        assert!(d > 0.0);
        assert!(saps_gap(0.0, 2, 21, 1e-3).is_err());
        assert!(saps_gap(0.0, 12, 21, 1e-3).is_err());
    }

    #[test]
    fn gap_vanishes_at_one_without_exploration() {
        let d = saps_gap(1.0, 5, 21, 0.0).unwrap();
        assert!(d.abs() < 1e-15);
    }

    #[test]
    fn fixed_point_below_half_and_shrinking() {
        let mut prev = f64::INFINITY;
        for tau in [1e-2, 1e-3, 1e-4] {
            let s = saps_fixed_point(4, 21, 1e-3, tau).unwrap();
            assert!(s.mu < 0.5 && s.mu > 0.0);
            let g = saps_gap(s.mu, 4, 21, 1e-3).unwrap();
            assert!((s.mu - logistic_tail(g / tau)).abs() <= 1e-12 * s.mu.max(1e-300));
            assert!(s.mu / tau < prev);
            prev = s.mu / tau;
        }
        for (m, k) in [(3, 5), (3, 21), (5, 21), (7, 31), (6, 11)] {
            for eps in [1e-3, 1e-2] {
                for tau in [1e-2, 1e-3] {
                    assert!(saps_fixed_point(m, k, eps, tau).unwrap().mu < 0.5);
                }
            }
        }
    }

    #[test]
    fn logistic_tail_is_stable() {
        assert_eq!(logistic_tail(0.0), 0.5);
        assert_eq!(logistic_tail(1e4), 0.0);
        assert_eq!(logistic_tail(-1e4), 1.0);
        assert!((logistic_tail(50.0) - (-50.0f64).exp()).abs() < 1e-30);
    }
}
