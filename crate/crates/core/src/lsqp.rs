//! Logspace SQP.
//!
//! The iteration runs in `y = log x` on the logged problem
//! `min log f  s.t.  log g_i <= 0, log h_j = 0`. The black boxes are still
//! evaluated in the original variables; their gradients are mapped with
//! `d log f(e^y) / d y_i = x_i / f(x) * df/dx_i`, so no user code changes.
//! Every function must stay strictly positive along the iterates.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::bfgs::BfgsState;
use crate::problem::{check_positivity, Evaluation, PositivityReport, Problem};
use crate::qp::QpData;
use crate::solver::{self, SolveError, SolveResult, SolverOptions, WorkingModel, WorkingSpace};

/// Logged values and logspace gradients at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct LogEvaluation {
    pub y: DVector<f64>,
    pub log_f: f64,
    pub log_grad_f: DVector<f64>,
    pub log_g: DVector<f64>,
    pub log_grad_g: DMatrix<f64>,
    pub log_h: DVector<f64>,
    pub log_grad_h: DMatrix<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("log transform failed: {report}")]
pub struct TransformFailure {
    pub report: PositivityReport,
}

fn log_rows(values: &DVector<f64>, grads: &DMatrix<f64>, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let mut out = grads.clone();
    for (i, mut row) in out.row_iter_mut().enumerate() {
        let v = values[i];
        for (k, e) in row.iter_mut().enumerate() {
            *e *= x[k] / v;
        }
    }
    (values.map(f64::ln), out)
}

/// Maps an evaluation to logspace. Fails when any of `f`, `g_i`, `h_j` is not
/// strictly positive.
pub fn log_transform(ev: &Evaluation) -> Result<LogEvaluation, TransformFailure> {
    let report = check_positivity(ev);
    if !report.is_log_transformable() {
        return Err(TransformFailure { report });
    }
    let x = &ev.x;
    let log_grad_f = ev.grad_f.component_mul(x) / ev.f;
    let (log_g, log_grad_g) = log_rows(&ev.g, &ev.grad_g, x);
    let (log_h, log_grad_h) = log_rows(&ev.h, &ev.grad_h, x);
    Ok(LogEvaluation {
        y: x.map(f64::ln),
        log_f: ev.f.ln(),
        log_grad_f,
        log_g,
        log_grad_g,
        log_h,
        log_grad_h,
    })
}

/// Sub-problem in `y`: `H = B`, `c = log_grad_f`, rows `(log_grad_g_i, log g_i)`
/// and `(log_grad_h_j, log h_j)`. Variable floors are not included.
pub fn build_log_subproblem(lev: &LogEvaluation, b: &BfgsState) -> QpData {
    QpData {
        h: b.b.clone(),
        c: lev.log_grad_f.clone(),
        a_ineq: lev.log_grad_g.clone(),
        b_ineq: lev.log_g.clone(),
        a_eq: lev.log_grad_h.clone(),
        b_eq: lev.log_h.clone(),
    }
}

/// `y = log x` working space.
pub struct LogSpace;

impl WorkingSpace for LogSpace {
    const NEEDS_POSITIVITY: bool = true;

    fn to_working(x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(x.len(), x.iter().map(|v| v.ln()))
    }

    fn to_original(w: &DVector<f64>) -> Vec<f64> {
        w.iter().map(|v| v.exp()).collect()
    }

    fn model(ev: Evaluation) -> Result<WorkingModel, PositivityReport> {
        let lev = log_transform(&ev).map_err(|e| e.report)?;
        Ok(WorkingModel {
            w: lev.y,
            objective: lev.log_f,
            grad_objective: lev.log_grad_f,
            ineq: lev.log_g,
            grad_ineq: lev.log_grad_g,
            eq: lev.log_h,
            grad_eq: lev.log_grad_h,
            evaluation: ev,
        })
    }

    fn trust_cap(_w: &DVector<f64>, d: &DVector<f64>, fraction: f64) -> f64 {
        // |exp(alpha d_i) - 1| <= fraction
        let up = fraction.ln_1p();
        let down = if fraction < 1.0 { (-fraction).ln_1p() } else { f64::NEG_INFINITY };
        d.iter()
            .map(|&di| {
                if di > 0.0 {
                    up / di
                } else if di < 0.0 {
                    down / di
                } else {
                    f64::INFINITY
                }
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Solves `problem` from `x0` with logspace SQP.
pub fn solve(problem: &Problem, x0: &[f64], options: &SolverOptions) -> Result<SolveResult, SolveError> {
    solver::run::<LogSpace>(problem, x0, options)
}
