//! Rosenbrock valley, shifted up by one so the objective stays positive, with
//! four inequality constraints.

use super::{BenchmarkCase, BenchmarkName, SuccessTolerances};
use crate::gp::{ClassifiedFunction, ConstraintClass, Role};
use crate::problem::{KnownOptimum, Problem, ScalarFunction};
use crate::solver::SolverOptions;

/// Per-iteration caps on `|dx_i| / x_i` for the first three iterations. Early
/// BFGS models are poor enough to throw the iterate far out of the valley.
pub const ROSENBROCK_TRUST_FRACTIONS: [f64; 3] = [0.2, 0.5, 1.0];

pub fn rosenbrock_problem() -> BenchmarkCase {
    let objective = ScalarFunction::new(|v| {
        let (x, y) = (v[0], v[1]);
        let r = y - x * x;
        (
            (1.0 - x).powi(2) + 100.0 * r * r + 1.0,
            vec![-2.0 * (1.0 - x) - 400.0 * x * r, 200.0 * r],
        )
    });
    let cubic = ScalarFunction::new(|v| ((v[0] - 1.0).powi(3) - v[1] + 2.0, vec![3.0 * (v[0] - 1.0).powi(2), -1.0]));
    let sum = ScalarFunction::new(|v| (v[0] + v[1] - 1.0, vec![1.0, 1.0]));
    let x_cap = ScalarFunction::new(|v| (v[0] / 1.5, vec![1.0 / 1.5, 0.0]));
    let y_cap = ScalarFunction::new(|v| (v[1] / 2.5, vec![0.0, 1.0 / 2.5]));

    let problem = Problem::builder(2, objective)
        .variable_names(["x", "y"])
        .metadata("benchmark", "rosenbrock")
        .inequality(cubic)
        .inequality(sum)
        .inequality(x_cap)
        .inequality(y_cap)
        .build()
        .expect("valid problem");

    let options = SolverOptions { trust_fractions: ROSENBROCK_TRUST_FRACTIONS.to_vec(), ..Default::default() };
    let sig = |role| ClassifiedFunction::new(role, ConstraintClass::Signomial);
    let mono = ClassifiedFunction::new(Role::Inequality, ConstraintClass::Monomial);

    BenchmarkCase {
        name: BenchmarkName::Rosenbrock,
        problem,
        known_optimum: KnownOptimum { objective_value: 1.0, x_star: vec![1.0, 1.0], published: vec![1.0, 1.0] },
        sqp_options: options.clone(),
        lsqp_options: options,
        success_tolerances: SuccessTolerances::default(),
        structure: vec![sig(Role::Objective), sig(Role::Inequality), sig(Role::Inequality), mono, mono],
        units: vec!["-", "-"],
    }
}
