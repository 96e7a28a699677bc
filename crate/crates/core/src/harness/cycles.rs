use crate::game::Policy;
use crate::matrix::SquareMatrix;

/// Large-change updates seen during a run and the policy averaged over the latest ones.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CycleSummary {
    pub qualifying: u64,
    /// `None` when fewer than `window` qualifying updates occurred.
    pub average: Option<Policy>,
}

impl CycleSummary {
    pub fn is_empty(&self) -> bool {
        self.average.is_none()
    }
}

/// Keeps the policies at the last `window` updates whose largest entry change
/// exceeded `threshold`.
#[derive(Debug, Clone)]
pub struct CycleTracker {
    k: usize,
    threshold: f64,
    window: usize,
    ring: Vec<f64>,
    next: usize,
    qualifying: u64,
}

impl CycleTracker {
    pub fn new(k: usize, threshold: f64, window: usize) -> Self {
        CycleTracker { k, threshold, window: window.max(1), ring: Vec::new(), next: 0, qualifying: 0 }
    }

    /// `policy` is the row-major matrix after the update.
    #[inline]
    pub fn record(&mut self, change: f64, policy: &[f64]) {
        if change <= self.threshold {
            return;
        }
        let kk = self.k * self.k;
        debug_assert_eq!(policy.len(), kk);
        if self.ring.len() < self.window * kk {
            self.ring.extend_from_slice(policy);
        } else {
            self.ring[self.next * kk..(self.next + 1) * kk].copy_from_slice(policy);
        }
        self.next = (self.next + 1) % self.window;
        self.qualifying += 1;
    }

    pub fn qualifying(&self) -> u64 {
        self.qualifying
    }

    pub fn summary(&self) -> CycleSummary {
        let kk = self.k * self.k;
        if self.qualifying < self.window as u64 {
            return CycleSummary { qualifying: self.qualifying, average: None };
        }
        let mut sum = vec![0.0; kk];
        for chunk in self.ring.chunks_exact(kk) {
            for (s, v) in sum.iter_mut().zip(chunk) {
                *s += v;
            }
        }
        let w = self.window as f64;
        let mut avg = SquareMatrix::from_vec(self.k, sum.into_iter().map(|s| s / w).collect()).expect("k x k");
        // Renormalize away accumulated rounding.
        for x in 0..self.k {
            let row = avg.row_mut(x);
            let total: f64 = row.iter().sum();
            row.iter_mut().for_each(|v| *v /= total);
        }
        CycleSummary { qualifying: self.qualifying, average: Some(Policy::new(avg).expect("average of stochastic rows")) }
    }
}

/// Offline tracking over a snapshot sequence: a snapshot qualifies when it
/// differs from its predecessor by more than `threshold` in some entry.
pub fn track_cycles(snapshots: &[Policy], threshold: f64, window: usize) -> CycleSummary {
    let Some(first) = snapshots.first() else {
        return CycleSummary::default();
    };
    let mut tracker = CycleTracker::new(first.k(), threshold, window);
    for w in snapshots.windows(2) {
        tracker.record(w[0].sup_distance(&w[1]), w[1].matrix().as_slice());
    }
    tracker.summary()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_trajectory_is_empty() {
        let s = track_cycles(&vec![Policy::babbling(3); 2000], 0.2, 500);
        assert_eq!(s.qualifying, 0);
        assert!(s.is_empty());
    }

    #[test]
    fn alternating_pair_averages_to_midpoint() {
        let a = Policy::from_rows(&[vec![1.0, 0.0], vec![0.25, 0.75]]).unwrap();
        let b = Policy::from_rows(&[vec![0.5, 0.5], vec![0.75, 0.25]]).unwrap();
        let seq: Vec<Policy> = (0..1001).map(|i| if i % 2 == 0 { a.clone() } else { b.clone() }).collect();
        let s = track_cycles(&seq, 0.2, 500);
        assert_eq!(s.qualifying, 1000);
        let avg = s.average.unwrap();
        for x in 0..2 {
            for m in 0..2 {
                assert!((avg.get(x, m) - 0.5 * (a.get(x, m) + b.get(x, m))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn too_few_qualifying() {
        let a = Policy::fully_revealing(2);
        let b = Policy::babbling(2);
        let s = track_cycles(&[a.clone(), b.clone(), a], 0.2, 500);
        assert_eq!(s.qualifying, 2);
        assert!(s.is_empty());
    }

    #[test]
    fn keeps_only_the_latest() {
        let mut t = CycleTracker::new(1, 0.2, 2);
        for v in [1.0, 1.0, 1.0] {
            t.record(0.5, &[v]);
        }
        t.record(0.1, &[1.0]);
        assert_eq!(t.qualifying(), 3);
        assert_eq!(t.summary().average.unwrap().get(0, 0), 1.0);
    }
}
