use super::{OdeSystem, Variant};
use crate::error::{Error, Result};
use crate::matrix::SquareMatrix;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub h: f64,
    /// Halve the step while `h * |rhs|_inf` exceeds this, down to `min_h`.
    pub halve_above: Option<f64>,
    pub min_h: f64,
    /// Time between recorded samples; every step is recorded if 0.
    pub sample_every: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        StepControl {
            h: 1e-2,
            halve_above: None,
            min_h: 1e-6,
            sample_every: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SquareMatrix>,
}

impl Trajectory {
    pub fn last(&self) -> &SquareMatrix {
        self.states.last().expect("trajectory holds the start state")
    }

    /// First sample time at which `pred` holds.
    pub fn first_time(&self, mut pred: impl FnMut(&SquareMatrix) -> bool) -> Option<f64> {
        self.times.iter().zip(&self.states).find(|(_, s)| pred(s)).map(|(t, _)| *t)
    }
}

fn axpy(base: &SquareMatrix, h: f64, dir: &SquareMatrix) -> SquareMatrix {
    let mut out = base.clone();
    for (o, d) in out.as_mut_slice().iter_mut().zip(dir.as_slice()) {
        *o += h * d;
    }
    out
}

fn admissible(sys: &OdeSystem, s: &SquareMatrix) -> bool {
    match sys.variant {
        Variant::QValues => s.as_slice().iter().all(|v| v.is_finite()),
        Variant::Policy => s.as_slice().iter().all(|&v| v > 0.0 && v < 1.0),
    }
}

fn rk4_step(sys: &OdeSystem, s: &SquareMatrix, k1: &SquareMatrix, h: f64) -> Result<SquareMatrix> {
    let k2 = sys.rhs(&axpy(s, h / 2.0, k1))?;
    let k3 = sys.rhs(&axpy(s, h / 2.0, &k2))?;
    let k4 = sys.rhs(&axpy(s, h, &k3))?;
    let mut out = s.clone();
    let slices = (k1.as_slice(), k2.as_slice(), k3.as_slice(), k4.as_slice());
    for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
        *o += h / 6.0 * (slices.0[i] + 2.0 * slices.1[i] + 2.0 * slices.2[i] + slices.3[i]);
    }
    Ok(out)
}

/// Classical fixed-step RK4 from `start` to `t_end`.
pub fn integrate(sys: &OdeSystem, start: &SquareMatrix, t_end: f64, ctl: &StepControl) -> Result<Trajectory> {
    if !(ctl.h > 0.0) || !(ctl.min_h > 0.0) || ctl.min_h > ctl.h {
        return Err(Error::Config(format!("invalid step control {ctl:?}")));
    }
    if start.dim() != sys.k() {
        return Err(Error::Dimension { expected: sys.k(), actual: start.dim() });
    }
    if !admissible(sys, start) {
        return Err(Error::Inadmissible { t: 0.0 });
    }
    let mut traj = Trajectory { times: vec![0.0], states: vec![start.clone()] };
    let mut s = start.clone();
    let mut t = 0.0;
    let mut next_sample = ctl.sample_every;
    while t < t_end {
        let k1 = sys.rhs(&s).map_err(|_| Error::Inadmissible { t })?;
        let mut h = ctl.h.min(t_end - t);
        if let Some(limit) = ctl.halve_above {
            let norm = k1.sup_norm();
            while h * norm > limit && h / 2.0 >= ctl.min_h {
                h /= 2.0;
            }
        }
        s = rk4_step(sys, &s, &k1, h).map_err(|_| Error::Inadmissible { t })?;
        t += h;
        if !admissible(sys, &s) {
            return Err(Error::Inadmissible { t });
        }
        if t >= next_sample - 1e-12 || t >= t_end {
            traj.times.push(t);
            traj.states.push(s.clone());
            while next_sample <= t + 1e-12 && ctl.sample_every > 0.0 {
                next_sample += ctl.sample_every;
            }
        }
    }
    Ok(traj)
}
