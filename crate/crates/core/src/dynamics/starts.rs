use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{OdeSystem, Variant};
use crate::equilibria::{worst_case_bound, BoundSearch, Partition};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;
use crate::sender::{init_qtable, InitMode};

/// Where a rest-point search or integration begins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeStart {
    Babbling,
    Revealing,
    /// The welfare-minimizing MSFR + SAPS partition; odd grids only.
    WorstCase,
    Random(u64),
}

impl fmt::Display for OdeStart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OdeStart::Babbling => f.write_str("babbling"),
            OdeStart::Revealing => f.write_str("revealing"),
            OdeStart::WorstCase => f.write_str("worst-case"),
            OdeStart::Random(seed) => write!(f, "random-{seed}"),
        }
    }
}

impl FromStr for OdeStart {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "babbling" => Ok(OdeStart::Babbling),
            "revealing" => Ok(OdeStart::Revealing),
            "worst-case" => Ok(OdeStart::WorstCase),
            _ => s
                .strip_prefix("random-")
                .and_then(|n| n.parse().ok())
                .map(OdeStart::Random)
                .ok_or_else(|| Error::Config(format!("unknown ODE start {s:?}; expected babbling, revealing, worst-case or random-<seed>"))),
        }
    }
}

/// Entries below this are raised before a policy start is renormalized.
pub const INTERIOR_FLOOR: f64 = 1e-12;

/// The state that represents a pure partition: its payoffs as Q-values, or
/// the logit response to it, floored to the interior, as a policy.
fn partition_state(sys: &OdeSystem, p: &Partition) -> SquareMatrix {
    let u = sys.payoffs_for_policy(p.to_policy().matrix());
    match sys.variant {
        Variant::QValues => u,
        Variant::Policy => {
            let mut mu = sys.policy_of(&u);
            for v in mu.as_mut_slice() {
                *v = v.max(INTERIOR_FLOOR);
            }
            normalize_rows(&mut mu);
            mu
        }
    }
}

pub fn start_state(sys: &OdeSystem, start: OdeStart) -> Result<SquareMatrix> {
    let k = sys.k();
    match start {
        OdeStart::Babbling => Ok(match sys.variant {
            Variant::QValues => init_qtable(&InitMode::Babbling, &sys.grid, sys.b)?.into_matrix(),
            Variant::Policy => SquareMatrix::filled(k, 1.0 / k as f64),
        }),
        OdeStart::Revealing => Ok(partition_state(sys, &Partition::singletons(k))),
        OdeStart::WorstCase => {
            let report = worst_case_bound(k, BoundSearch::Symmetric)?;
            Ok(partition_state(sys, &report.argmin_partition))
        }
        OdeStart::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            Ok(match sys.variant {
                Variant::QValues => SquareMatrix::from_fn(k, |_, _| -rng.gen::<f64>()),
                Variant::Policy => {
                    let mut s = SquareMatrix::from_fn(k, |_, _| rng.gen_range(0.05..1.0));
                    normalize_rows(&mut s);
                    s
                }
            })
        }
    }
}

fn normalize_rows(s: &mut SquareMatrix) {
    for x in 0..s.dim() {
        let row = s.row_mut(x);
        let total: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= total);
    }
}

/// Moves every Q entry by `±size`, or scales every policy entry by `1 ± size`
/// and renormalizes the rows, with random signs.
pub fn perturb(sys: &OdeSystem, state: &SquareMatrix, size: f64, seed: u64) -> SquareMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = state.clone();
    for v in s.as_mut_slice() {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        match sys.variant {
            Variant::QValues => *v += sign * size,
            Variant::Policy => *v *= 1.0 + sign * size,
        }
    }
    if sys.variant == Variant::Policy {
        normalize_rows(&mut s);
    }
    s
}
