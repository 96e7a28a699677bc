use std::fmt;

use nalgebra::{Complex, DMatrix, Schur};

use super::{OdeSystem, Variant};
use crate::error::Result;
use crate::matrix::SquareMatrix;

/// Eigenvalues with `|Re| <= ZERO_BAND` count as neutral directions.
pub const ZERO_BAND: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    Attractor,
    LinearlyUnstable,
    Inconclusive,
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Attractor => "attractor",
            Classification::LinearlyUnstable => "linearly-unstable",
            Classification::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestPointOptions {
    /// Damping of the fixed-point iteration.
    pub lambda: f64,
    pub tol: f64,
    pub max_iter: usize,
    /// Finite-difference step of the Jacobian.
    pub fd_step: f64,
}

impl Default for RestPointOptions {
    fn default() -> Self {
        RestPointOptions { lambda: 0.5, tol: 1e-10, max_iter: 100_000, fd_step: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestPointReport {
    pub point: SquareMatrix,
    pub residual_norm: f64,
    pub iterations: usize,
    pub settled: bool,
    pub eigenvalues: Vec<Complex<f64>>,
    pub classification: Classification,
    pub zero_subspace_dim: usize,
}

impl RestPointReport {
    pub fn max_real_part(&self) -> Option<f64> {
        self.eigenvalues.iter().map(|l| l.re).fold(None, |acc, re| Some(acc.map_or(re, |a: f64| a.max(re))))
    }
}

fn fixed_point_map(sys: &OdeSystem, s: &SquareMatrix) -> SquareMatrix {
    match sys.variant {
        Variant::QValues => sys.payoff_map(s),
        Variant::Policy => sys.logit_response(s),
    }
}

/// Damped fixed-point iteration toward a rest point, followed by linear classification.
pub fn find_rest_point(sys: &OdeSystem, start: &SquareMatrix, opts: &RestPointOptions) -> Result<RestPointReport> {
    let lambda = opts.lambda;
    let mut s = start.clone();
    let mut residual = sys.rhs(&s)?.sup_norm();
    let mut iterations = 0;
    while residual >= opts.tol && iterations < opts.max_iter {
        let target = fixed_point_map(sys, &s);
        for (v, t) in s.as_mut_slice().iter_mut().zip(target.as_slice()) {
            *v = (1.0 - lambda) * *v + lambda * t;
        }
        iterations += 1;
        residual = sys.rhs(&s)?.sup_norm();
    }
    let settled = residual < opts.tol;
    if !settled {
        return Ok(RestPointReport {
            point: s,
            residual_norm: residual,
            iterations,
            settled,
            eigenvalues: Vec::new(),
            classification: Classification::Inconclusive,
            zero_subspace_dim: 0,
        });
    }
    let (eigenvalues, classification, zero_subspace_dim) = match eigenvalues(jacobian(sys, &s, opts.fd_step)?) {
        Some(ev) => {
            let (class, dim) = classify(&ev);
            (ev, class, dim)
        }
        None => (Vec::new(), Classification::Inconclusive, 0),
    };
    Ok(RestPointReport { point: s, residual_norm: residual, iterations, settled, eigenvalues, classification, zero_subspace_dim })
}

/// Free coordinates of a state: every Q entry, or the first `K - 1` entries of each policy row.
fn coordinates(sys: &OdeSystem, s: &SquareMatrix) -> Vec<f64> {
    match sys.variant {
        Variant::QValues => s.as_slice().to_vec(),
        Variant::Policy => s.rows().flat_map(|r| r[..r.len() - 1].iter().copied()).collect(),
    }
}

fn from_coordinates(sys: &OdeSystem, v: &[f64]) -> SquareMatrix {
    let k = sys.k();
    match sys.variant {
        Variant::QValues => SquareMatrix::from_vec(k, v.to_vec()).expect("K^2 coordinates"),
        Variant::Policy => {
            let mut s = SquareMatrix::zeros(k);
            for x in 0..k {
                let free = &v[x * (k - 1)..(x + 1) * (k - 1)];
                let row = s.row_mut(x);
                row[..k - 1].copy_from_slice(free);
                row[k - 1] = 1.0 - free.iter().sum::<f64>();
            }
            s
        }
    }
}

/// Central finite-difference Jacobian of the vector field in free coordinates
/// (`K^2` for Q-values, `K (K - 1)` for policies).
pub fn jacobian(sys: &OdeSystem, point: &SquareMatrix, h: f64) -> Result<DMatrix<f64>> {
    fd_jacobian(|v| Ok(coordinates(sys, &sys.rhs(&from_coordinates(sys, v))?)), &coordinates(sys, point), h)
}

/// Central finite differences of `f` at `x` with step `h` on each coordinate.
pub fn fd_jacobian(mut f: impl FnMut(&[f64]) -> Result<Vec<f64>>, x: &[f64], h: f64) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut probe = x.to_vec();
    let mut jac = DMatrix::zeros(0, n);
    for j in 0..n {
        probe[j] = x[j] + h;
        let plus = f(&probe)?;
        probe[j] = x[j] - h;
        let minus = f(&probe)?;
        probe[j] = x[j];
        if j == 0 {
            jac = DMatrix::zeros(plus.len(), n);
        }
        for (i, (p, m)) in plus.iter().zip(&minus).enumerate() {
            jac[(i, j)] = (p - m) / (2.0 * h);
        }
    }
    Ok(jac)
}

/// Eigenvalues through a real Schur decomposition, loosening the relative
/// deflation tolerance if the QR sweeps stall; `None` if none converges.
pub fn eigenvalues(jac: DMatrix<f64>) -> Option<Vec<Complex<f64>>> {
    for tol in [1e-14, 1e-12, 1e-10] {
        if let Some(schur) = Schur::try_new(jac.clone(), tol, 10_000) {
            return Some(schur.complex_eigenvalues().iter().copied().collect());
        }
    }
    None
}

/// Attractor if every eigenvalue outside the zero band has negative real part,
/// linearly unstable if any has positive real part. Also returns the neutral count.
pub fn classify(eigenvalues: &[Complex<f64>]) -> (Classification, usize) {
    let neutral = eigenvalues.iter().filter(|l| l.re.abs() <= ZERO_BAND).count();
    let class = if eigenvalues.iter().any(|l| l.re > ZERO_BAND) {
        Classification::LinearlyUnstable
    } else if neutral < eigenvalues.len() {
        Classification::Attractor
    } else {
        Classification::Inconclusive
    };
    (class, neutral)
}
