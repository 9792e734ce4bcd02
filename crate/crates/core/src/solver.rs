//! The SQP iteration shared by the original-space and logspace drivers.
//!
//! Both drivers run the same loop on a *working space* `w`: the original
//! variables for classical SQP, `w = log x` for logspace SQP. A working space
//! supplies the coordinate maps and the local model of every function (value
//! and gradient in working coordinates, with the unit right-hand side already
//! moved to the left). Everything else (sub-problem, line search, multiplier
//! update, termination and quasi-Newton update) is written once here.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bfgs::BfgsState;
use crate::problem::{evaluate_point, Evaluation, PositivityReport, Problem, ProblemError};
use crate::qp::{solve_qp, solve_qp_elastic, QpData, QpError, QpSolution, QpStatus};

pub const ARMIJO_CONSTANT: f64 = 1e-4;
pub const BACKTRACK_FACTOR: f64 = 0.5;
pub const MAX_BACKTRACKS: usize = 25;
/// Penalty is kept at least this multiple of the largest multiplier.
pub const PENALTY_MARGIN: f64 = 1.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    pub max_iter: usize,
    /// Infinity-norm threshold on the Lagrangian gradient.
    pub eps_grad_lagrangian: f64,
    /// Infinity-norm threshold on the working-space step.
    pub eps_step: f64,
    /// Relative per-variable step limits for the first iterations.
    pub trust_fractions: Vec<f64>,
    pub enforce_positivity_in_linesearch: bool,
    pub merit_penalty_init: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            eps_grad_lagrangian: 1e-6,
            eps_step: 1e-8,
            trust_fractions: Vec::new(),
            enforce_positivity_in_linesearch: false,
            merit_penalty_init: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), SolveError> {
        let bad = |what: String| Err(SolveError::InvalidOptions(what));
        if self.max_iter == 0 {
            return bad("max_iter must be at least 1".into());
        }
        if !(self.eps_grad_lagrangian > 0.0) || !(self.eps_step > 0.0) {
            return bad("tolerances must be positive".into());
        }
        if !(self.merit_penalty_init > 0.0) {
            return bad("merit_penalty_init must be positive".into());
        }
        if let Some(t) = self.trust_fractions.iter().find(|t| !(**t > 0.0 && **t <= 1.0)) {
            return bad(format!("trust fraction {t} outside (0, 1]"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Termination {
    GradLagrangian,
    SmallStep,
    MaxIter,
    LineSearchFailure,
    TransformFailure,
}

impl Termination {
    pub fn is_converged(self) -> bool {
        matches!(self, Termination::GradLagrangian | Termination::SmallStep)
    }
}

impl std::fmt::Display for Termination {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub x: Vec<f64>,
    pub f: f64,
    /// Merit at this point, under the penalty in force when it was accepted.
    pub merit: f64,
    /// Merit of the previous point under the same penalty.
    pub merit_before: f64,
    pub alpha: f64,
    /// Infinity norm of the accepted working-space step.
    pub step_norm: f64,
    /// Largest violation of `g <= 1` or `h = 1` in original units.
    pub constraint_violation: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Multipliers {
    pub ineq: Vec<f64>,
    pub eq: Vec<f64>,
    /// Multipliers of the variable floors.
    pub bounds: Vec<f64>,
}

impl Multipliers {
    fn ones(n_ineq: usize, n_eq: usize, n: usize) -> Self {
        Self { ineq: vec![1.0; n_ineq], eq: vec![1.0; n_eq], bounds: vec![1.0; n] }
    }

    fn from_qp(sol: &QpSolution, n_ineq: usize) -> Self {
        let all = sol.mu_ineq.as_slice();
        Self {
            ineq: all[..n_ineq].to_vec(),
            eq: sol.mu_eq.as_slice().to_vec(),
            bounds: all[n_ineq..].to_vec(),
        }
    }

    fn max_abs(&self) -> f64 {
        self.ineq.iter().chain(&self.eq).chain(&self.bounds).fold(0.0, |m, v| m.max(v.abs()))
    }

    fn step_towards(&self, target: &Multipliers, alpha: f64) -> Multipliers {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> {
            a.iter().zip(b).map(|(x, y)| x + alpha * (y - x)).collect()
        };
        Multipliers {
            ineq: mix(&self.ineq, &target.ineq),
            eq: mix(&self.eq, &target.eq),
            bounds: mix(&self.bounds, &target.bounds),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub x_final: Vec<f64>,
    pub f_final: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub trace: Vec<IterationRecord>,
    pub multipliers: Multipliers,
    /// Set when the run ended with [`Termination::TransformFailure`].
    pub transform_failure: Option<PositivityReport>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolveError {
    #[error("invalid solver options: {0}")]
    InvalidOptions(String),
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

/// Local model of every problem function in working coordinates.
///
/// Constraint rows read `ineq + grad_ineq d <= 0` and `eq + grad_eq d = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkingModel {
    pub w: DVector<f64>,
    pub objective: f64,
    pub grad_objective: DVector<f64>,
    pub ineq: DVector<f64>,
    pub grad_ineq: DMatrix<f64>,
    pub eq: DVector<f64>,
    pub grad_eq: DMatrix<f64>,
    pub evaluation: Evaluation,
}

impl WorkingModel {
    /// Working-space Lagrangian gradient, with floors `w >= w_lb` entering as `-nu`.
    pub fn lagrangian_gradient(&self, mu: &Multipliers) -> DVector<f64> {
        let mut g = self.grad_objective.clone();
        g += self.grad_ineq.tr_mul(&DVector::from_column_slice(&mu.ineq));
        g += self.grad_eq.tr_mul(&DVector::from_column_slice(&mu.eq));
        for (gi, nu) in g.iter_mut().zip(&mu.bounds) {
            *gi -= nu;
        }
        g
    }

    fn violation(&self, w_lb: &DVector<f64>) -> f64 {
        let ineq: f64 = self.ineq.iter().map(|v| v.max(0.0)).sum();
        let eq: f64 = self.eq.iter().map(|v| v.abs()).sum();
        let bounds: f64 = w_lb.iter().zip(self.w.iter()).map(|(lb, w)| (lb - w).max(0.0)).sum();
        ineq + eq + bounds
    }

    fn max_violation(&self) -> f64 {
        let ineq = self.ineq.iter().map(|v| v.max(0.0));
        let eq = self.eq.iter().map(|v| v.abs());
        ineq.chain(eq).fold(0.0, f64::max)
    }

    fn merit(&self, penalty: f64, w_lb: &DVector<f64>) -> f64 {
        self.objective + penalty * self.violation(w_lb)
    }

    /// Predicted merit change along `d` from the linear model.
    fn merit_derivative(&self, d: &DVector<f64>, penalty: f64, w_lb: &DVector<f64>) -> f64 {
        let lin_ineq: f64 =
            (&self.ineq + &self.grad_ineq * d).iter().map(|v| v.max(0.0)).sum();
        let lin_eq: f64 = (&self.eq + &self.grad_eq * d).iter().map(|v| v.abs()).sum();
        let lin_bounds: f64 = w_lb
            .iter()
            .zip(self.w.iter().zip(d.iter()))
            .map(|(lb, (w, di))| (lb - w - di).max(0.0))
            .sum();
        self.grad_objective.dot(d) + penalty * (lin_ineq + lin_eq + lin_bounds - self.violation(w_lb))
    }

    /// Quadratic sub-problem `min 1/2 d'Bd + grad'd` with the linearized constraints.
    pub fn subproblem(&self, b: &BfgsState) -> QpData {
        QpData {
            h: b.b.clone(),
            c: self.grad_objective.clone(),
            a_ineq: self.grad_ineq.clone(),
            b_ineq: self.ineq.clone(),
            a_eq: self.grad_eq.clone(),
            b_eq: self.eq.clone(),
        }
    }
}

/// Appends `w + d >= w_lb` as rows `-d_i + (w_lb_i - w_i) <= 0`.
pub fn with_bound_rows(mut qp: QpData, w: &DVector<f64>, w_lb: &DVector<f64>) -> QpData {
    let n = qp.n();
    let m = qp.n_ineq();
    let mut a = DMatrix::zeros(m + n, n);
    a.view_mut((0, 0), (m, n)).copy_from(&qp.a_ineq);
    let mut b = DVector::zeros(m + n);
    b.rows_mut(0, m).copy_from(&qp.b_ineq);
    for i in 0..n {
        a[(m + i, i)] = -1.0;
        b[m + i] = w_lb[i] - w[i];
    }
    qp.a_ineq = a;
    qp.b_ineq = b;
    qp
}

/// Coordinates in which the SQP iteration runs.
pub trait WorkingSpace {
    /// Whether models can fail for non-positive function values.
    const NEEDS_POSITIVITY: bool;

    fn to_working(x: &[f64]) -> DVector<f64>;
    fn to_original(w: &DVector<f64>) -> Vec<f64>;
    fn model(ev: Evaluation) -> Result<WorkingModel, PositivityReport>;
    /// Largest `alpha` keeping `|x_i(alpha) - x_i| <= fraction * x_i` for every `i`.
    fn trust_cap(w: &DVector<f64>, d: &DVector<f64>, fraction: f64) -> f64;
}

pub(crate) enum TrialFailure {
    /// Model construction failed at the trial point and positivity is not enforced.
    Transform(PositivityReport),
    Exhausted,
}

pub(crate) struct Accepted {
    pub alpha: f64,
    pub model: WorkingModel,
    pub merit_before: f64,
    pub merit_after: f64,
}

/// Backtracking Armijo search on the l1 merit in working coordinates.
pub(crate) fn backtrack<S: WorkingSpace>(
    problem: &Problem,
    current: &WorkingModel,
    d: &DVector<f64>,
    penalty: f64,
    alpha_max: f64,
    w_lb: &DVector<f64>,
    enforce_positivity: bool,
) -> Result<Accepted, TrialFailure> {
    let phi0 = current.merit(penalty, w_lb);
    let slope = current.merit_derivative(d, penalty, w_lb).min(0.0);
    let lb = problem.lower_bounds();
    let trial_at = |w_trial: DVector<f64>| -> Option<Result<WorkingModel, PositivityReport>> {
        let x: Vec<f64> = S::to_original(&w_trial).iter().zip(lb).map(|(x, l)| x.max(*l)).collect();
        evaluate_point(problem, &x).ok().map(S::model)
    };
    let sufficient = |phi: f64, alpha: f64| phi < phi0 && phi <= phi0 + ARMIJO_CONSTANT * alpha * slope;

    let mut alpha = alpha_max;
    for _ in 0..=MAX_BACKTRACKS {
        match trial_at(&current.w + d * alpha) {
            Some(Ok(model)) => {
                let phi = model.merit(penalty, w_lb);
                if sufficient(phi, alpha) {
                    return Ok(Accepted { alpha, model, merit_before: phi0, merit_after: phi });
                }
            }
            Some(Err(report)) if !enforce_positivity => return Err(TrialFailure::Transform(report)),
            _ => {}
        }
        alpha *= BACKTRACK_FACTOR;
    }
    Err(TrialFailure::Exhausted)
}

fn record(model: &WorkingModel, merit: f64, merit_before: f64, alpha: f64, step: f64, penalty: f64) -> IterationRecord {
    IterationRecord {
        x: model.evaluation.x.as_slice().to_vec(),
        f: model.evaluation.f,
        merit,
        merit_before,
        alpha,
        step_norm: step,
        constraint_violation: model.evaluation.constraint_violation(),
        penalty,
    }
}

fn solve_subproblem(qp: &QpData, penalty: f64, b: &mut BfgsState) -> Result<QpSolution, QpError> {
    let attempt = |qp: &QpData| -> Result<QpSolution, QpError> {
        let sol = solve_qp(qp)?;
        match sol.status {
            QpStatus::Optimal => Ok(sol),
            QpStatus::Infeasible | QpStatus::IterLimit => solve_qp_elastic(qp, penalty),
        }
    };
    match attempt(qp) {
        Err(QpError::NumericalBreakdown(_)) => {
            b.reset();
            let mut retry = qp.clone();
            retry.h = b.b.clone();
            attempt(&retry)
        }
        other => other,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Sqp,
    Lsqp,
}

impl Algorithm {
    pub const BOTH: [Algorithm; 2] = [Algorithm::Sqp, Algorithm::Lsqp];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Sqp => "SQP",
            Algorithm::Lsqp => "LSQP",
        }
    }

    pub fn solve(self, problem: &Problem, x0: &[f64], options: &SolverOptions) -> Result<SolveResult, SolveError> {
        match self {
            Algorithm::Sqp => crate::sqp::solve(problem, x0, options),
            Algorithm::Lsqp => crate::lsqp::solve(problem, x0, options),
        }
    }
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sqp" => Ok(Algorithm::Sqp),
            "lsqp" => Ok(Algorithm::Lsqp),
            _ => Err(format!("unknown algorithm {s:?}")),
        }
    }
}

/// Runs the SQP iteration in working space `S`.
pub fn run<S: WorkingSpace>(
    problem: &Problem,
    x0: &[f64],
    options: &SolverOptions,
) -> Result<SolveResult, SolveError> {
    options.validate()?;
    let n = problem.n_vars();
    let (n_ineq, n_eq) = (problem.n_ineq(), problem.n_eq());
    let ev0 = evaluate_point(problem, x0)?;
    let w_lb = S::to_working(problem.lower_bounds());

    let failed_at_start = |report: PositivityReport, ev: &Evaluation| SolveResult {
        x_final: x0.to_vec(),
        f_final: ev.f,
        iterations: 0,
        termination: Termination::TransformFailure,
        trace: vec![IterationRecord {
                x: x0.to_vec(),
            f: ev.f,
            merit: f64::NAN,
            merit_before: f64::NAN,
            alpha: 0.0,
            step_norm: 0.0,
            constraint_violation: ev.constraint_violation(),
            penalty: options.merit_penalty_init,
        }],
        multipliers: Multipliers::ones(n_ineq, n_eq, n),
        transform_failure: Some(report),
    };
    let mut model = match S::model(ev0.clone()) {
        Ok(m) => m,
        Err(report) => return Ok(failed_at_start(report, &ev0)),
    };

    let mut penalty = options.merit_penalty_init;
    let mut mu = Multipliers::ones(n_ineq, n_eq, n);
    let mut b = BfgsState::identity(n);
    let merit0 = model.merit(penalty, &w_lb);
    let mut trace = vec![record(&model, merit0, merit0, 0.0, 0.0, penalty)];

    let finish = |model: &WorkingModel, iterations, termination, trace, multipliers, failure| SolveResult {
        x_final: model.evaluation.x.as_slice().to_vec(),
        f_final: model.evaluation.f,
        iterations,
        termination,
        trace,
        multipliers,
        transform_failure: failure,
    };

    for k in 0..options.max_iter {
        let qp = with_bound_rows(model.subproblem(&b), &model.w, &w_lb);
        let sol = match solve_subproblem(&qp, penalty, &mut b) {
            Ok(sol) => sol,
            Err(_) => return Ok(finish(&model, k, Termination::LineSearchFailure, trace, mu, None)),
        };
        let d = sol.d.clone();
        let mu_qp = Multipliers::from_qp(&sol, n_ineq);

        // Optimality of the current point under the fresh QP multipliers. The
        // running estimate `mu` lags behind after short steps and can keep the
        // post-step test from firing at a point that is already a KKT point.
        if model.lagrangian_gradient(&mu_qp).amax() < options.eps_grad_lagrangian
            && model.max_violation() <= options.eps_grad_lagrangian
        {
            return Ok(finish(&model, k, Termination::GradLagrangian, trace, mu_qp, None));
        }
        if d.amax() < options.eps_step {
            return Ok(finish(&model, k, Termination::SmallStep, trace, mu_qp, None));
        }

        let needed = PENALTY_MARGIN * mu_qp.max_abs();
        // Powell's rule: follow the multipliers down as well as up, but only
        // halfway, so a blown-up early estimate does not freeze the merit.
        penalty = needed.max(0.5 * (penalty + needed));
        let alpha_max = match options.trust_fractions.get(k) {
            Some(&fraction) => S::trust_cap(&model.w, &d, fraction).min(1.0),
            None => 1.0,
        };

        let accepted = match backtrack::<S>(
            problem,
            &model,
            &d,
            penalty,
            alpha_max,
            &w_lb,
            options.enforce_positivity_in_linesearch,
        ) {
            Ok(a) => a,
            Err(TrialFailure::Transform(report)) => {
                return Ok(finish(&model, k, Termination::TransformFailure, trace, mu, Some(report)));
            }
            Err(TrialFailure::Exhausted) => {
                return Ok(finish(&model, k, Termination::LineSearchFailure, trace, mu, None));
            }
        };

        let alpha = accepted.alpha;
        let mu_next = mu.step_towards(&mu_qp, alpha);
        let grad_old = model.lagrangian_gradient(&mu_next);
        let grad_new = accepted.model.lagrangian_gradient(&mu_next);
        let s = &accepted.model.w - &model.w;
        let step = s.amax();

        let rec = record(&accepted.model, accepted.merit_after, accepted.merit_before, alpha, step, penalty);
        trace.push(rec);
        model = accepted.model;
        mu = mu_next;

        if grad_new.amax() < options.eps_grad_lagrangian
            && model.max_violation() <= options.eps_grad_lagrangian
        {
            return Ok(finish(&model, k + 1, Termination::GradLagrangian, trace, mu, None));
        }
        if step < options.eps_step {
            return Ok(finish(&model, k + 1, Termination::SmallStep, trace, mu, None));
        }
        b.update(&s, &(grad_new - grad_old));
    }

    Ok(finish(&model, options.max_iter, Termination::MaxIter, trace, mu, None))
}
