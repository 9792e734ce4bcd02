//! Heat exchanger design: minimize total area `x1 + x2 + x3`.
//!
//! The first constraint is `833.33252 x4 / (x1 x6) + 100 / x6 - 83333.333 / (x1 x6) <= 1`.
//! With `x2` in place of `x1` in the leading term the tabulated optimum is
//! neither active on it nor stationary, so `x1` is used.

use super::{BenchmarkCase, BenchmarkName, SuccessTolerances};
use crate::gp::{ClassifiedFunction, ConstraintClass, Monomial, Posynomial, Role, Signomial};
use crate::problem::{KnownOptimum, Problem};
use crate::solver::SolverOptions;

/// High-precision optimum of the heat exchanger problem.
const X_STAR: [f64; 8] = [
    579.306_684_701_803_5,
    1_359.970_674_388_675_7,
    5_109.970_661_438_19,
    182.017_699_604_208_67,
    295.601_173_542_472_45,
    217.982_300_395_791_44,
    286.416_526_061_736,
    395.601_173_542_472_4,
];

pub fn floudas_problem() -> BenchmarkCase {
    let m = |c: f64, pairs: &[(usize, f64)]| Monomial::from_pairs(c, 8, pairs);
    let posy = |terms: Vec<Monomial>| Posynomial::new(terms);
    let sig = |p: Vec<Monomial>, n: Vec<Monomial>| Signomial::new(posy(p), Some(posy(n)));

    let objective = posy(vec![m(1.0, &[(0, 1.0)]), m(1.0, &[(1, 1.0)]), m(1.0, &[(2, 1.0)])]);
    let g1 = sig(
        vec![m(833.33252, &[(3, 1.0), (0, -1.0), (5, -1.0)]), m(100.0, &[(5, -1.0)])],
        vec![m(83333.333, &[(0, -1.0), (5, -1.0)])],
    );
    let g2 = sig(
        vec![m(1250.0, &[(4, 1.0), (1, -1.0), (6, -1.0)]), m(1.0, &[(3, 1.0), (6, -1.0)])],
        vec![m(1250.0, &[(3, 1.0), (1, -1.0), (6, -1.0)])],
    );
    let g3 = sig(
        vec![m(1_250_000.0, &[(2, -1.0), (7, -1.0)]), m(1.0, &[(4, 1.0), (7, -1.0)])],
        vec![m(2500.0, &[(4, 1.0), (2, -1.0), (7, -1.0)])],
    );
    let g4 = posy(vec![m(0.0025, &[(3, 1.0)]), m(0.0025, &[(5, 1.0)])]);
    let g5 = sig(vec![m(0.0025, &[(4, 1.0)]), m(0.0025, &[(6, 1.0)])], vec![m(0.0025, &[(3, 1.0)])]);
    let g6 = sig(vec![m(0.01, &[(7, 1.0)])], vec![m(0.01, &[(4, 1.0)])]);

    let problem = Problem::builder(8, objective.to_function())
        .variable_names((1..=8).map(|i| format!("x{i}")))
        .metadata("benchmark", "floudas")
        .inequality(g1.to_function())
        .inequality(g2.to_function())
        .inequality(g3.to_function())
        .inequality(g4.to_function())
        .inequality(g5.to_function())
        .inequality(g6.to_function())
        .build()
        .expect("valid problem");

    let s = ClassifiedFunction::new(Role::Inequality, ConstraintClass::Signomial);
    BenchmarkCase {
        name: BenchmarkName::Floudas,
        problem,
        known_optimum: KnownOptimum {
            objective_value: X_STAR[0] + X_STAR[1] + X_STAR[2],
            x_star: X_STAR.to_vec(),
            published: vec![579.3, 1360.0, 5110.0, 182.0, 295.6, 218.0, 286.4, 395.6],
        },
        sqp_options: SolverOptions::default(),
        lsqp_options: SolverOptions::default(),
        success_tolerances: SuccessTolerances::default(),
        structure: vec![
            ClassifiedFunction::new(Role::Objective, ConstraintClass::Posynomial),
            s,
            s,
            s,
            ClassifiedFunction::new(Role::Inequality, ConstraintClass::Posynomial),
            s,
            s,
        ],
        units: vec!["-"; 8],
    }
}
