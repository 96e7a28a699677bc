use crate::game::Policy;

/// Streaming version of [`detect_convergence`]: feed one snapshot at a time.
#[derive(Debug, Clone)]
pub struct ConvergenceMonitor {
    delta: f64,
    window: usize,
    previous: Option<Policy>,
    streak: usize,
    seen: usize,
    first: Option<usize>,
}

impl ConvergenceMonitor {
    /// `window` counts consecutive snapshot-to-snapshot changes.
    pub fn new(delta: f64, window: usize) -> Self {
        ConvergenceMonitor { delta, window: window.max(1), previous: None, streak: 0, seen: 0, first: None }
    }

    /// Returns `true` once the trailing `window` changes have all stayed below `delta`.
    pub fn push(&mut self, snapshot: &Policy) -> bool {
        if let Some(prev) = &self.previous {
            if prev.sup_distance(snapshot) < self.delta {
                self.streak += 1;
            } else {
                self.streak = 0;
            }
        }
        self.previous = Some(snapshot.clone());
        let converged = self.streak >= self.window;
        if converged && self.first.is_none() {
            self.first = Some(self.seen);
        }
        self.seen += 1;
        converged
    }

    pub fn converged(&self) -> bool {
        self.streak >= self.window
    }

    /// Snapshot index at which the criterion first held.
    pub fn first_converged(&self) -> Option<usize> {
        self.first
    }
}

/// Whether the last `window` consecutive sup-norm changes all stayed below
/// `delta`, and the first snapshot index at which that held.
pub fn detect_convergence(snapshots: &[Policy], delta: f64, window: usize) -> (bool, Option<usize>) {
    let mut m = ConvergenceMonitor::new(delta, window);
    let mut last = false;
    for s in snapshots {
        last = m.push(s);
    }
    (last, m.first_converged())
}
