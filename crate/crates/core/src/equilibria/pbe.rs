use super::partition::Partition;
use crate::error::{Error, Result};
use crate::game::{check_epsilon, prior_variance, receiver_payoff, sender_payoff, Bias, StateGrid};

/// Largest grid for which pure connected equilibria are enumerated.
pub const ENUMERATION_CAP: usize = 31;

/// Indifference within this margin counts as weak preference.
const TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct PbeEntry {
    pub partition: Partition,
    pub sender_payoff: f64,
    pub receiver_payoff: f64,
    pub welfare: f64,
}

/// Receiver action for a pool of states `lo..lo+n` under exploration `epsilon`.
fn pool_action(lo: usize, n: usize, grid: &StateGrid, epsilon: f64) -> f64 {
    let k = grid.k();
    let mean = (lo as f64 + (n as f64 - 1.0) / 2.0) / (k - 1) as f64;
    let n = n as f64;
    ((1.0 - epsilon) * n * mean + epsilon / 2.0) / ((1.0 - epsilon) * n + epsilon)
}

struct Search<'a> {
    grid: &'a StateGrid,
    b: f64,
    epsilon: f64,
    sizes: Vec<usize>,
    actions: Vec<f64>,
    out: Vec<PbeEntry>,
}

impl Search<'_> {
    fn prefers(&self, x: usize, own: f64, other: f64) -> bool {
        let s = self.grid.state(x);
        sender_payoff(s, own, self.b) >= sender_payoff(s, other, self.b) - TIE_TOL
    }

    fn extend(&mut self, start: usize) {
        let k = self.grid.k();
        if start == k {
            if self.fully_incentive_compatible() {
                let entry = self.entry();
                self.out.push(entry);
            }
            return;
        }
        for n in 1..=k - start {
            let y = pool_action(start, n, self.grid, self.epsilon);
            if let Some(&prev) = self.actions.last() {
                // The two states on either side of the new boundary.
                if !self.prefers(start - 1, prev, y) || !self.prefers(start, y, prev) {
                    continue;
                }
            }
            self.sizes.push(n);
            self.actions.push(y);
            self.extend(start + n);
            self.sizes.pop();
            self.actions.pop();
        }
    }

    fn fully_incentive_compatible(&self) -> bool {
        let mut x = 0;
        for (i, &n) in self.sizes.iter().enumerate() {
            for _ in 0..n {
                let own = self.actions[i];
                if !self.actions.iter().all(|&other| self.prefers(x, own, other)) {
                    return false;
                }
                x += 1;
            }
        }
        true
    }

    fn entry(&self) -> PbeEntry {
        let k = self.grid.k();
        let eps = self.epsilon;
        let floor = eps / k as f64;
        let unused = k - self.sizes.len();
        let (mut us, mut ur) = (0.0, 0.0);
        let mut x = 0;
        for (i, &n) in self.sizes.iter().enumerate() {
            for _ in 0..n {
                let s = self.grid.state(x);
                for (j, &y) in self.actions.iter().enumerate() {
                    let p = if i == j { 1.0 - eps + floor } else { floor };
                    us += p * sender_payoff(s, y, self.b);
                    ur += p * receiver_payoff(s, y);
                }
                if unused > 0 && eps > 0.0 {
                    let p = floor * unused as f64;
                    us += p * sender_payoff(s, 0.5, self.b);
                    ur += p * receiver_payoff(s, 0.5);
                }
                x += 1;
            }
        }
        us /= k as f64;
        ur /= k as f64;
        let v = prior_variance(self.grid);
        PbeEntry {
            partition: Partition::from_sizes(self.sizes.clone(), k).expect("search covers the grid"),
            sender_payoff: us,
            receiver_payoff: ur,
            welfare: (1.0 + ur / v).clamp(0.0, 1.0),
        }
    }
}

/// All ordered partitions into contiguous pools, each sending its own message,
/// at which every state weakly prefers its pool's action to every other pool's.
/// Messages left unused are assumed deterred by off-path beliefs. Sorted by
/// sender payoff, best first.
pub fn enumerate_pure_connected_pbe(k: usize, b: Bias, epsilon: f64) -> Result<Vec<PbeEntry>> {
    if k > ENUMERATION_CAP {
        return Err(Error::EnumerationCap { k, cap: ENUMERATION_CAP });
    }
    check_epsilon(epsilon)?;
    let grid = StateGrid::new(k)?;
    let mut search = Search { grid: &grid, b: b.value(), epsilon, sizes: Vec::new(), actions: Vec::new(), out: Vec::new() };
    search.extend(0);
    let mut out = search.out;
    out.sort_by(|a, b| b.sender_payoff.total_cmp(&a.sender_payoff).then_with(|| a.partition.cmp(&b.partition)));
    Ok(out)
}

/// The equilibrium with the highest sender payoff.
pub fn best_pbe(k: usize, b: Bias, epsilon: f64) -> Result<PbeEntry> {
    Ok(enumerate_pure_connected_pbe(k, b, epsilon)?.into_iter().next().expect("babbling is always an equilibrium"))
}
