//! First-order optimality certificate computed from a point alone.
//!
//! Multipliers are re-estimated by non-negative least squares over the
//! near-active constraints, so the certificate never relies on a solver's own
//! multiplier estimates. Stationarity is measured either in the original
//! coordinates, `dL/dx_i`, or in logarithmic ones, `x_i / |f| * dL/dx_i`; the
//! latter is what a logspace solver drives to zero and is independent of
//! variable scaling.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::problem::{evaluate_point, Problem, ProblemError};

/// Constraints within this relative distance of their bound are treated as active.
pub const ACTIVE_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KktCertificate {
    pub stationarity: f64,
    pub primal_violation: f64,
    pub complementarity: f64,
    /// Largest of the three components.
    pub residual: f64,
}

/// Lawson-Hanson non-negative least squares: `min ||A z - b||` with `z >= 0`.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let p = a.ncols();
    let mut z = DVector::zeros(p);
    let mut passive = vec![false; p];
    let tol = 1e-12 * a.amax().max(1.0) * b.amax().max(1.0);
    for _outer in 0..(3 * p + 10) {
        let w = a.tr_mul(&(b - a * &z));
        let candidate = (0..p).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let idx: Vec<usize> = (0..p).filter(|&k| passive[k]).collect();
            let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
            let Some(s_sub) = sub.clone().svd(true, true).solve(b, 1e-14).ok() else { return z };
            if s_sub.iter().all(|v| *v > 0.0) {
                z.fill(0.0);
                for (c, &k) in idx.iter().enumerate() {
                    z[k] = s_sub[c];
                }
                break;
            }
            // step back towards z until a passive coefficient hits zero
            let mut alpha = 1.0f64;
            for (c, &k) in idx.iter().enumerate() {
                if s_sub[c] <= 0.0 {
                    let denom = z[k] - s_sub[c];
                    if denom > 0.0 {
                        alpha = alpha.min(z[k] / denom);
                    }
                }
            }
            for (c, &k) in idx.iter().enumerate() {
                z[k] += alpha * (s_sub[c] - z[k]);
                if z[k] <= 1e-15 {
                    z[k] = 0.0;
                    passive[k] = false;
                }
            }
            if !passive.iter().any(|&p| p) {
                break;
            }
        }
    }
    z
}

/// Coordinates in which stationarity is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Coordinates {
    /// `dL/dx_i` as is.
    Original,
    /// `x_i / |f| * dL/dx_i`: the gradient of the log-transformed problem.
    #[default]
    Log,
}

/// KKT residual of `problem` at `x` in logarithmic coordinates.
pub fn certify(problem: &Problem, x: &[f64]) -> Result<KktCertificate, ProblemError> {
    certify_in(problem, x, Coordinates::Log)
}

/// KKT residual of `problem` at `x`, stationarity measured in `coords`.
/// Primal violation and complementarity are relative to the bounds either way.
pub fn certify_in(problem: &Problem, x: &[f64], coords: Coordinates) -> Result<KktCertificate, ProblemError> {
    let ev = evaluate_point(problem, x)?;
    let n = problem.n_vars();
    let lb = problem.lower_bounds();
    let (f_scale, w): (f64, Vec<f64>) = match coords {
        Coordinates::Original => (1.0, vec![1.0; n]),
        Coordinates::Log => (ev.f.abs().max(f64::MIN_POSITIVE), x.to_vec()),
    };

    let target = DVector::from_fn(n, |i, _| -w[i] * ev.grad_f[i] / f_scale);

    let mut columns: Vec<DVector<f64>> = Vec::new();
    let mut slack: Vec<f64> = Vec::new();
    for i in 0..problem.n_ineq() {
        if ev.g[i] >= 1.0 - ACTIVE_TOLERANCE {
            columns.push(DVector::from_fn(n, |k, _| w[k] * ev.grad_g[(i, k)]));
            slack.push((1.0 - ev.g[i]).max(0.0));
        }
    }
    for j in 0..problem.n_eq() {
        let col = DVector::from_fn(n, |k, _| w[k] * ev.grad_h[(j, k)]);
        columns.push(-&col);
        columns.push(col);
        slack.push(0.0);
        slack.push(0.0);
    }
    for k in 0..n {
        if x[k] <= lb[k] * (1.0 + ACTIVE_TOLERANCE) {
            let mut col = DVector::zeros(n);
            col[k] = -w[k];
            columns.push(col);
            slack.push((x[k] - lb[k]) / lb[k]);
        }
    }

    let (stationarity, complementarity) = if columns.is_empty() {
        (target.amax(), 0.0)
    } else {
        let a = DMatrix::from_columns(&columns);
        let z = nnls(&a, &target);
        let r = &a * &z - &target;
        let comp = z.iter().zip(&slack).map(|(m, s)| m * s).fold(0.0, f64::max);
        (r.amax(), comp)
    };

    let primal_violation = ev
        .g
        .iter()
        .map(|g| (g - 1.0).max(0.0))
        .chain(ev.h.iter().map(|h| (h - 1.0).abs()))
        .chain(x.iter().zip(lb).map(|(xi, l)| ((l - xi) / l).max(0.0)))
        .fold(0.0, f64::max);

    Ok(KktCertificate {
        stationarity,
        primal_violation,
        complementarity,
        residual: stationarity.max(primal_violation).max(complementarity),
    })
}
