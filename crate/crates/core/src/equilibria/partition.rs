use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::game::{prior_variance, Policy, StateGrid};

/// Support threshold for predicates evaluated on learned, softmax-smoothed policies.
pub const DEFAULT_SUPPORT_TOL: f64 = 1e-2;

/// An ordered split of the grid into contiguous pools, listed from the lowest state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Partition {
    sizes: Vec<usize>,
}

impl Partition {
    pub fn from_sizes(sizes: Vec<usize>, k: usize) -> Result<Self> {
        if sizes.is_empty() || sizes.contains(&0) || sizes.iter().sum::<usize>() != k {
            return Err(Error::BadPartition { sizes, k });
        }
        Ok(Partition { sizes })
    }

    pub fn singletons(k: usize) -> Self {
        Partition { sizes: vec![1; k] }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn k(&self) -> usize {
        self.sizes.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// State index ranges of the pools.
    pub fn pools(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.sizes
            .iter()
            .map(|&n| {
                let r = start..start + n;
                start += n;
                r
            })
            .collect()
    }

    /// Pure policy in which pool `i` sends message `i`.
    pub fn to_policy(&self) -> Policy {
        let messages: Vec<usize> =
            self.sizes.iter().enumerate().flat_map(|(i, &n)| std::iter::repeat(i).take(n)).collect();
        Policy::pure(&messages).expect("pool indices fit the grid")
    }

    /// Welfare of the pure partition policy without exploration, from pool variances
    /// `(N^2 - 1) / (12 (K - 1)^2)`.
    pub fn welfare(&self) -> f64 {
        let k = self.k();
        if k < 2 {
            return 1.0;
        }
        let grid = StateGrid::new(k).expect("k >= 2");
        1.0 - residual_variance(&self.sizes, k) / prior_variance(&grid)
    }

    pub fn middle_is_singleton(&self) -> bool {
        let k = self.k();
        if k % 2 == 0 {
            return false;
        }
        self.pools().iter().any(|r| r.start == k / 2 && r.len() == 1)
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.sizes.iter().map(usize::to_string).collect();
        f.write_str(&parts.join(","))
    }
}

/// Expected within-pool variance of the state for a pure partition.
pub(crate) fn residual_variance(sizes: &[usize], k: usize) -> f64 {
    let kf = k as f64;
    let step2 = ((k - 1) * (k - 1)) as f64;
    sizes.iter().map(|&n| {
        let n = n as f64;
        (n / kf) * (n * n - 1.0) / (12.0 * step2)
    }).sum()
}

fn support(mu: &Policy, tol: f64, x: usize, m: usize) -> bool {
    mu.get(x, m) > tol
}

/// Groups states that share any message with probability above `support_tol`.
/// Fails if a group is not a contiguous run of states.
pub fn pool_structure(mu: &Policy, support_tol: f64) -> Result<Partition> {
    let k = mu.k();
    let mut parent: Vec<usize> = (0..k).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for m in 0..k {
        let mut first = None;
        for x in 0..k {
            if support(mu, support_tol, x, m) {
                match first {
                    None => first = Some(x),
                    Some(f) => {
                        let (a, b) = (find(&mut parent, f), find(&mut parent, x));
                        parent[a.max(b)] = a.min(b);
                    }
                }
            }
        }
    }
    let mut sizes = Vec::new();
    let mut current = find(&mut parent, 0);
    let mut run = 0;
    let mut seen = vec![false; k];
    for x in 0..k {
        let root = find(&mut parent, x);
        if root != current {
            seen[current] = true;
            if seen[root] {
                let message = (0..k).find(|&m| support(mu, support_tol, x, m)).unwrap_or(0);
                return Err(Error::NotAPartition { state: x, message });
            }
            sizes.push(run);
            current = root;
            run = 0;
        }
        run += 1;
    }
    sizes.push(run);
    Partition::from_sizes(sizes, k)
}

/// Every message's support is a contiguous interval of states.
pub fn is_connected(mu: &Policy, support_tol: f64) -> bool {
    let k = mu.k();
    (0..k).all(|m| {
        let xs: Vec<usize> = (0..k).filter(|&x| support(mu, support_tol, x, m)).collect();
        xs.windows(2).all(|w| w[1] == w[0] + 1)
    })
}

/// No message sent at the middle state is sent at any other state.
pub fn is_msfr(mu: &Policy, grid: &StateGrid, support_tol: f64) -> Result<bool> {
    let mid = grid.require_odd()?;
    if mu.k() != grid.k() {
        return Err(Error::Dimension { expected: grid.k(), actual: mu.k() });
    }
    let k = grid.k();
    Ok((0..k)
        .filter(|&m| support(mu, support_tol, mid, m))
        .all(|m| (0..k).all(|x| x == mid || !support(mu, support_tol, x, m))))
}

/// Adjacent pool sizes differ by at most one.
pub fn is_saps(partition: &Partition) -> bool {
    partition.sizes().windows(2).all(|w| w[0].abs_diff(w[1]) <= 1)
}

/// Connected, MSFR and SAPS flags of a learned policy at a support threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PolicyShape {
    pub connected: bool,
    pub msfr: bool,
    pub saps: bool,
}

impl PolicyShape {
    pub fn all(&self) -> bool {
        self.connected && self.msfr && self.saps
    }
}

pub fn classify_policy(mu: &Policy, grid: &StateGrid, support_tol: f64) -> PolicyShape {
    let connected = is_connected(mu, support_tol);
    let msfr = is_msfr(mu, grid, support_tol).unwrap_or(false);
    let saps = pool_structure(mu, support_tol).map(|p| is_saps(&p)).unwrap_or(false);
    PolicyShape { connected, msfr, saps }
}
