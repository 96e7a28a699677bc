//! Pure connected-pool equilibria of the discretized game, the shape predicates
//! learned policies are checked against, and the worst-case welfare bound.

mod bound;
mod partition;
mod pbe;

pub use bound::{n_hat, nu_decay_check, worst_case_bound, BoundReport, BoundSearch, DecayTable, EXHAUSTIVE_CAP};
pub use partition::{
    classify_policy, is_connected, is_msfr, is_saps, pool_structure, Partition, PolicyShape, DEFAULT_SUPPORT_TOL,
};
pub use pbe::{best_pbe, enumerate_pure_connected_pbe, PbeEntry, ENUMERATION_CAP};
