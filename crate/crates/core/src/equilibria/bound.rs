use super::partition::{residual_variance, Partition};
use crate::error::{Error, Result};
use crate::game::{prior_variance, StateGrid};

/// Largest grid for the exhaustive (asymmetric) audit search.
pub const EXHAUSTIVE_CAP: usize = 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BoundSearch {
    /// Dynamic program over one side of a symmetric partition.
    #[default]
    Symmetric,
    /// Depth-first search over every partition with a singleton middle pool.
    Exhaustive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub k: usize,
    pub n_hat: f64,
    pub n_k: usize,
    pub max_pool: usize,
    /// Welfare of the feasible strictly increasing construction.
    pub u_lower_closed_minus: f64,
    /// Welfare of the relaxed, generally infeasible, pool sequence.
    pub u_lower_closed_plus: f64,
    pub u_lower_brute: f64,
    pub argmin_partition: Partition,
}

impl BoundReport {
    /// Pool sizes on one side of the middle state, innermost first.
    pub fn side_sizes(&self) -> Vec<usize> {
        let sizes = self.argmin_partition.sizes();
        let mid = sizes.len() / 2;
        sizes[mid + 1..].to_vec()
    }
}

/// `-3/2 + sqrt(5/4 + K)`.
pub fn n_hat(k: usize) -> f64 {
    -1.5 + (1.25 + k as f64).sqrt()
}

fn welfare_from_residual(residual: f64, k: usize) -> f64 {
    1.0 - residual / prior_variance(&StateGrid::new(k).expect("k >= 3"))
}

fn symmetric(side: &[usize]) -> Vec<usize> {
    side.iter().rev().copied().chain(std::iter::once(1)).chain(side.iter().copied()).collect()
}

/// Side composition of `(k - 1) / 2` maximizing the sum of cubed pool sizes,
/// with the innermost pool at most 2 and neighbors within one of each other.
/// Ties go to the lexicographically smallest sequence.
fn best_side(half: usize) -> Vec<usize> {
    // best[r][last]: best cube sum for the remaining `r` states after a pool of size `last`.
    let width = half + 2;
    let mut best = vec![vec![None::<u64>; width]; half + 1];
    for last in 0..width {
        best[0][last] = Some(0);
    }
    for r in 1..=half {
        for last in 1..width {
            let mut top = None;
            for n in last.saturating_sub(1).max(1)..=(last + 1).min(r) {
                if let Some(rest) = best[r - n][n] {
                    let v = (n as u64).pow(3) + rest;
                    if top.map_or(true, |t| v > t) {
                        top = Some(v);
                    }
                }
            }
            best[r][last] = top;
        }
    }
    // The middle singleton acts as a previous pool of size 1.
    let mut side = Vec::new();
    let (mut r, mut last) = (half, 1);
    while r > 0 {
        let target = best[r][last].expect("a run of singletons is always feasible");
        let n = (last.saturating_sub(1).max(1)..=(last + 1).min(r))
            .find(|&n| best[r - n][n].map(|rest| (n as u64).pow(3) + rest) == Some(target))
            .expect("the optimum is attained");
        side.push(n);
        r -= n;
        last = n;
    }
    side
}

fn exhaustive(k: usize) -> Vec<usize> {
    fn go(k: usize, mid: usize, start: usize, sizes: &mut Vec<usize>, best: &mut (u64, Vec<usize>)) {
        if start == k {
            let score: u64 = sizes.iter().map(|&n| (n as u64).pow(3)).sum();
            if score > best.0 || (score == best.0 && *sizes < best.1) {
                *best = (score, sizes.clone());
            }
            return;
        }
        let last = sizes.last().copied();
        for n in 1..=k - start {
            if let Some(l) = last {
                if l.abs_diff(n) > 1 {
                    continue;
                }
            }
            let end = start + n;
            // The middle state must form its own pool.
            let covers_mid = start <= mid && mid < end;
            if covers_mid && (start != mid || n != 1) {
                continue;
            }
            sizes.push(n);
            go(k, mid, end, sizes, best);
            sizes.pop();
        }
    }
    let mut best = (0, Vec::new());
    go(k, k / 2, 0, &mut Vec::new(), &mut best);
    best.1
}

/// The worst welfare over symmetric connected partitions with a singleton
/// middle pool and similar adjacent pool sizes, bracketed by the closed forms.
pub fn worst_case_bound(k: usize, search: BoundSearch) -> Result<BoundReport> {
    if k % 2 == 0 {
        return Err(Error::EvenGrid(k));
    }
    if k < 3 {
        return Err(Error::GridTooSmall(k));
    }
    let half = (k - 1) / 2;
    let sizes = match search {
        BoundSearch::Symmetric => symmetric(&best_side(half)),
        BoundSearch::Exhaustive => {
            if k > EXHAUSTIVE_CAP {
                return Err(Error::EnumerationCap { k, cap: EXHAUSTIVE_CAP });
            }
            exhaustive(k)
        }
    };
    let argmin_partition = Partition::from_sizes(sizes, k)?;
    let u_lower_brute = argmin_partition.welfare();

    let n_hat = n_hat(k);
    let n_k = n_hat.floor() as usize;
    let max_pool = (n_hat + 1.0).floor() as usize;
    let kf = k as f64;
    let denom = 6.0 * kf * (kf - 1.0) * (kf - 1.0);

    // Relaxed sequence 2, ..., n_k + 2 on each side.
    let top = (n_k + 2) as f64;
    let cubes = (top * (top + 1.0) / 2.0).powi(2) - 1.0;
    let plus_residual = (cubes - half as f64) / denom;
    let u_lower_closed_plus = welfare_from_residual(plus_residual, k);

    // Feasible sequence: singletons followed by 2, ..., M(K).
    let climb: usize = (2..=max_pool).sum();
    let minus_side: Vec<usize> = std::iter::repeat(1).take(half.saturating_sub(climb)).chain(2..=max_pool).collect();
    let u_lower_closed_minus = if minus_side.iter().sum::<usize>() == half {
        welfare_from_residual(residual_variance(&symmetric(&minus_side), k), k)
    } else {
        f64::NAN
    };

    Ok(BoundReport { k, n_hat, n_k, max_pool, u_lower_closed_minus, u_lower_closed_plus, u_lower_brute, argmin_partition })
}

/// `(K, 1 - U_K, K (1 - U_K))` rows.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayTable {
    pub rows: Vec<(usize, f64, f64)>,
    pub max_scaled: f64,
}

pub fn nu_decay_check(ks: &[usize]) -> Result<DecayTable> {
    let mut rows = Vec::with_capacity(ks.len());
    for &k in ks {
        let nu = 1.0 - worst_case_bound(k, BoundSearch::Symmetric)?.u_lower_brute;
        rows.push((k, nu, k as f64 * nu));
    }
    let max_scaled = rows.iter().map(|r| r.2).fold(0.0, f64::max);
    Ok(DecayTable { rows, max_scaled })
}
