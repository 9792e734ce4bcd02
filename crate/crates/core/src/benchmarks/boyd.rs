//! Box design GP: maximize volume `hwd` under wall, floor and aspect-ratio limits.

use super::{require, BenchmarkCase, BenchmarkError, BenchmarkName, ConstantTable, SuccessTolerances};
use crate::gp::{ClassifiedFunction, ConstraintClass, Monomial, Posynomial, Role};
use crate::problem::{KnownOptimum, Problem};
use crate::solver::SolverOptions;

/// Wall and floor areas in m², aspect-ratio limits dimensionless.
/// With these the wall area and the `w <= h / alpha`, `d <= delta w` limits are
/// active and the floor is slack.
pub const BOYD_DEFAULTS: [(&str, f64); 6] = [
    ("A_wall", 100.0),
    ("A_floor", 1000.0),
    ("alpha", 0.5),
    ("beta", 2.0),
    ("gamma", 0.5),
    ("delta", 2.0),
];

const KEYS: [&str; 6] = ["A_wall", "A_floor", "alpha", "beta", "gamma", "delta"];

pub fn boyd_problem() -> BenchmarkCase {
    let table = BOYD_DEFAULTS.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    boyd_from_table(&table).expect("defaults are complete")
}

pub fn boyd_from_table(table: &ConstantTable) -> Result<BenchmarkCase, BenchmarkError> {
    let [a_wall, a_floor, alpha, beta, gamma, delta] = require(table, KEYS)?;
    // variables: h, w, d
    let (h, w, d) = (0, 1, 2);
    let m = |c: f64, pairs: &[(usize, f64)]| Monomial::from_pairs(c, 3, pairs);

    let objective = m(1.0, &[(h, -1.0), (w, -1.0), (d, -1.0)]);
    let wall = Posynomial::new(vec![m(2.0 / a_wall, &[(h, 1.0), (w, 1.0)]), m(2.0 / a_wall, &[(h, 1.0), (d, 1.0)])]);
    let monomials = [
        m(1.0 / a_floor, &[(w, 1.0), (d, 1.0)]),
        m(alpha, &[(w, 1.0), (h, -1.0)]),
        m(1.0 / beta, &[(h, 1.0), (w, -1.0)]),
        m(gamma, &[(w, 1.0), (d, -1.0)]),
        m(1.0 / delta, &[(d, 1.0), (w, -1.0)]),
    ];

    let mut builder = Problem::builder(3, objective.to_function())
        .variable_names(["h", "w", "d"])
        .metadata("benchmark", "boyd")
        .inequality(wall.to_function());
    for mono in &monomials {
        builder = builder.inequality(mono.to_function());
    }
    let problem = builder.build()?;

    // Closed form for the active set {wall, alpha w / h, d / (delta w)}.
    let h_star = (alpha * a_wall / (2.0 * (1.0 + delta))).sqrt();
    let x_star = vec![h_star, h_star / alpha, delta * h_star / alpha];
    let known_optimum = KnownOptimum {
        objective_value: objective.value(&x_star),
        x_star,
        published: vec![2.89, 5.77, 11.55],
    };

    let mut structure = vec![
        ClassifiedFunction::new(Role::Objective, ConstraintClass::Monomial),
        ClassifiedFunction::new(Role::Inequality, ConstraintClass::Posynomial),
    ];
    structure.extend(std::iter::repeat(ClassifiedFunction::new(Role::Inequality, ConstraintClass::Monomial)).take(5));

    Ok(BenchmarkCase {
        name: BenchmarkName::Boyd,
        problem,
        known_optimum,
        sqp_options: SolverOptions::default(),
        lsqp_options: SolverOptions::default(),
        success_tolerances: SuccessTolerances::default(),
        structure,
        units: vec!["m", "m", "m"],
    })
}
