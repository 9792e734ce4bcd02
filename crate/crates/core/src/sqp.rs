//! Classical SQP in the original variables.

use nalgebra::DVector;

use crate::bfgs::BfgsState;
use crate::problem::{Evaluation, PositivityReport, Problem};
use crate::qp::QpData;
use crate::solver::{self, SolveError, SolveResult, SolverOptions, TrialFailure, WorkingModel, WorkingSpace};

/// Identity working space.
pub struct OriginalSpace;

impl WorkingSpace for OriginalSpace {
    const NEEDS_POSITIVITY: bool = false;

    fn to_working(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    fn to_original(w: &DVector<f64>) -> Vec<f64> {
        w.as_slice().to_vec()
    }

    fn model(ev: Evaluation) -> Result<WorkingModel, PositivityReport> {
        Ok(WorkingModel {
            w: ev.x.clone(),
            objective: ev.f,
            grad_objective: ev.grad_f.clone(),
            ineq: ev.g.map(|g| g - 1.0),
            grad_ineq: ev.grad_g.clone(),
            eq: ev.h.map(|h| h - 1.0),
            grad_eq: ev.grad_h.clone(),
            evaluation: ev,
        })
    }

    fn trust_cap(w: &DVector<f64>, d: &DVector<f64>, fraction: f64) -> f64 {
        w.iter()
            .zip(d.iter())
            .filter(|(_, di)| **di != 0.0)
            .map(|(xi, di)| fraction * xi.abs() / di.abs())
            .fold(f64::INFINITY, f64::min)
    }
}

/// Sub-problem at `ev`: `H = B`, `c = grad f`, rows `(grad g_i, g_i - 1)` and
/// `(grad h_j, h_j - 1)`. Variable floors are not included.
pub fn build_subproblem(ev: &Evaluation, b: &BfgsState) -> QpData {
    OriginalSpace::model(ev.clone()).expect("identity model never fails").subproblem(b)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchStep {
    pub alpha: f64,
    pub evaluation: Evaluation,
    pub merit_before: f64,
    pub merit_after: f64,
}

/// Armijo backtracking on `f + penalty * (sum max(0, g_i - 1) + sum |h_j - 1|)`
/// starting from `alpha_max`. Returns `None` after the backtrack limit.
pub fn line_search(
    problem: &Problem,
    ev: &Evaluation,
    d: &DVector<f64>,
    penalty: f64,
    alpha_max: f64,
) -> Option<LineSearchStep> {
    let model = OriginalSpace::model(ev.clone()).expect("identity model never fails");
    let w_lb = OriginalSpace::to_working(problem.lower_bounds());
    match solver::backtrack::<OriginalSpace>(problem, &model, d, penalty, alpha_max, &w_lb, false) {
        Ok(a) => Some(LineSearchStep {
            alpha: a.alpha,
            evaluation: a.model.evaluation,
            merit_before: a.merit_before,
            merit_after: a.merit_after,
        }),
        Err(TrialFailure::Exhausted) | Err(TrialFailure::Transform(_)) => None,
    }
}

/// Solves `problem` from `x0` with SQP in the original variables.
pub fn solve(problem: &Problem, x0: &[f64], options: &SolverOptions) -> Result<SolveResult, SolveError> {
    solver::run::<OriginalSpace>(problem, x0, options)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{evaluate_point, ScalarFunction};
    use crate::solver::Termination;
    use nalgebra::dvector;

    fn square() -> Problem {
        Problem::builder(1, ScalarFunction::new(|x| (x[0] * x[0], vec![2.0 * x[0]])))
            .lower_bounds(vec![1e-300])
            .build()
            .unwrap()
    }

    #[test]
    fn subproblem_of_square() {
        let ev = evaluate_point(&square(), &[3.0]).unwrap();
        let qp = build_subproblem(&ev, &BfgsState::identity(1));
        assert_eq!(qp.h[(0, 0)], 1.0);
        assert_eq!(qp.c[0], 6.0);
    }

    #[test]
    fn subproblem_row() {
        let p = Problem::builder(1, ScalarFunction::new(|x| (x[0], vec![1.0])))
            .inequality(ScalarFunction::new(|x| (x[0], vec![1.0])))
            .build()
            .unwrap();
        let ev = evaluate_point(&p, &[2.0]).unwrap();
        let qp = build_subproblem(&ev, &BfgsState::identity(1));
        assert_eq!(qp.a_ineq[(0, 0)], 1.0);
        assert_eq!(qp.b_ineq[0], 1.0);
    }

    #[test]
    fn full_step_accepted() {
        // allow x = 0 exactly
        let p = Problem::builder(1, ScalarFunction::new(|x| (x[0] * x[0], vec![2.0 * x[0]])))
            .lower_bounds(vec![f64::MIN_POSITIVE])
            .build()
            .unwrap();
        let ev = evaluate_point(&p, &[1.0]).unwrap();
        let step = line_search(&p, &ev, &dvector![-1.0 + 1e-12], 1.0, 1.0).unwrap();
        assert_eq!(step.alpha, 1.0);
    }

    #[test]
    fn long_step_backtracks() {
        // Armijo by hand: alpha = 1, 0.5, 0.25 give x = -9, -4, -1.5 with
        // f = 81, 16, 2.25, none below 1 - 1e-4 * alpha * 20.
        let p = Problem::builder(1, ScalarFunction::new(|x| ((x[0] - 10.0).powi(2), vec![2.0 * (x[0] - 10.0)])))
            .build()
            .unwrap();
        // shifted so the walk stays above the floor: x_k = 11, d = -10
        let ev = evaluate_point(&p, &[11.0]).unwrap();
        let step = line_search(&p, &ev, &dvector![-10.0], 1.0, 1.0).unwrap();
        assert!(step.alpha <= 0.25);
        assert_eq!(step.alpha, 0.125);
    }

    #[test]
    fn starts_at_optimum() {
        let p = Problem::builder(1, ScalarFunction::new(|x| ((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)])))
            .build()
            .unwrap();
        let r = solve(&p, &[2.0], &SolverOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.termination, Termination::GradLagrangian);
        assert_eq!(r.trace.len(), 1);
    }

    #[test]
    fn invalid_options_rejected() {
        let opts = SolverOptions { trust_fractions: vec![1.5], ..Default::default() };
        assert!(matches!(solve(&square(), &[1.0], &opts), Err(SolveError::InvalidOptions(_))));
    }
}
