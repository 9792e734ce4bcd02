mod common;

use approx::assert_relative_eq;
use lsqp::benchmarks::BenchmarkName;
use lsqp::bfgs::BfgsState;
use lsqp::harness::{initial_guesses, ExperimentConfig, GuessQuality};
use lsqp::lsqp::{build_log_subproblem, log_transform};
use lsqp::problem::{evaluate_point, FunctionId, Problem, ScalarFunction};
use lsqp::qp::solve_qp;
use lsqp::sqp::build_subproblem;
use lsqp::{Algorithm, SolverOptions, Termination};

/// `x = s * z`: the same problem in rescaled variables.
fn rescaled(problem: &Problem, s: &[f64]) -> Problem {
    let wrap = |f: &ScalarFunction| {
        let f = f.clone();
        let s = s.to_vec();
        ScalarFunction::new(move |z| {
            let x: Vec<f64> = z.iter().zip(&s).map(|(z, s)| z * s).collect();
            let (v, g) = f.eval(&x);
            (v, g.iter().zip(&s).map(|(g, s)| g * s).collect())
        })
    };
    let mut b = Problem::builder(problem.n_vars(), wrap(problem.objective()))
        .lower_bounds(problem.lower_bounds().iter().zip(s).map(|(l, s)| l / s).collect());
    for g in problem.ineq_constraints() {
        b = b.inequality(wrap(g));
    }
    for h in problem.eq_constraints() {
        b = b.equality(wrap(h));
    }
    b.build().unwrap()
}

#[test]
fn boyd_optimum_gives_null_step() {
    let case = BenchmarkName::Boyd.case();
    let ev = evaluate_point(&case.problem, &case.known_optimum.x_star).unwrap();
    let b = BfgsState::identity(3);

    let d = solve_qp(&build_subproblem(&ev, &b)).unwrap();
    assert!(d.d.amax() <= 1e-5, "original space: {}", d.d);
    // multipliers reproduce -grad f as a conic combination
    let r = &ev.grad_f + ev.grad_g.transpose() * &d.mu_ineq;
    assert!(r.amax() <= 1e-5 * ev.grad_f.amax().max(1.0));
    assert!(d.mu_ineq.iter().all(|m| *m >= 0.0));

    let lev = log_transform(&ev).unwrap();
    let d = solve_qp(&build_log_subproblem(&lev, &b)).unwrap();
    assert!(d.d.amax() <= 1e-5, "logspace: {}", d.d);
}

#[test]
fn rosenbrock_near_optimum() {
    let case = BenchmarkName::Rosenbrock.case();
    let r = Algorithm::Sqp.solve(&case.problem, &[1.05, 0.95], &case.sqp_options).unwrap();
    assert!(r.termination.is_converged());
    assert!((3..=5).contains(&r.iterations), "{} iterations", r.iterations);
    assert_relative_eq!(r.f_final, 1.0, max_relative = 1e-6);
    assert_relative_eq!(r.x_final[0], 1.0, max_relative = 1e-4);
    assert_relative_eq!(r.x_final[1], 1.0, max_relative = 1e-4);
}

#[test]
fn start_at_unconstrained_optimum() {
    // LSQP needs f > 0, so it gets the shifted version
    let sq = Problem::builder(1, ScalarFunction::new(|x| ((x[0] - 2.0).powi(2), vec![2.0 * (x[0] - 2.0)])))
        .build()
        .unwrap();
    let r = Algorithm::Sqp.solve(&sq, &[2.0], &SolverOptions::default()).unwrap();
    assert_eq!((r.iterations, r.termination), (0, Termination::GradLagrangian));
    assert_eq!(r.trace.len(), 1);

    let shifted = Problem::builder(1, ScalarFunction::new(|x| ((x[0] - 2.0).powi(2) + 1.0, vec![2.0 * (x[0] - 2.0)])))
        .build()
        .unwrap();
    let r = Algorithm::Lsqp.solve(&shifted, &[2.0], &SolverOptions::default()).unwrap();
    assert_eq!((r.iterations, r.termination), (0, Termination::GradLagrangian));
}

#[test]
fn rosenbrock_at_optimum_both_algorithms() {
    let case = BenchmarkName::Rosenbrock.case();
    for a in Algorithm::BOTH {
        let r = a.solve(&case.problem, &[1.0, 1.0], case.default_options(a)).unwrap();
        assert_eq!(r.iterations, 0, "{a}");
        assert!(case.is_success(&r), "{a}");
    }
}

#[test]
fn traces_and_merit_on_benchmarks() {
    for name in BenchmarkName::ALL {
        let case = name.case();
        let mut config = ExperimentConfig::new(name, GuessQuality::Poor);
        config.trials_per_cell = 10;
        config.rng_seed = 5;
        for x0 in initial_guesses(&case, &config) {
            for a in Algorithm::BOTH {
                let r = a.solve(&case.problem, &x0, case.default_options(a)).unwrap();
                assert_eq!(r.trace.len(), r.iterations + 1, "{name} {a}");
                assert!(r.iterations <= 500);
                assert_eq!(r.trace[0].x, x0);
                for rec in &r.trace[1..] {
                    assert!(rec.merit < rec.merit_before, "{name} {a}: merit {} !< {}", rec.merit, rec.merit_before);
                    assert!(rec.alpha > 0.0 && rec.alpha <= 1.0);
                }
            }
        }
    }
}

#[test]
fn trust_fractions_cap_early_steps() {
    let case = BenchmarkName::Rosenbrock.case();
    let mut config = ExperimentConfig::new(BenchmarkName::Rosenbrock, GuessQuality::Poor);
    config.trials_per_cell = 20;
    for x0 in initial_guesses(&case, &config) {
        for a in Algorithm::BOTH {
            let opts = case.default_options(a);
            let r = a.solve(&case.problem, &x0, opts).unwrap();
            for (k, fraction) in opts.trust_fractions.iter().enumerate() {
                let (Some(prev), Some(next)) = (r.trace.get(k), r.trace.get(k + 1)) else { break };
                for (p, q) in prev.x.iter().zip(&next.x) {
                    // the same relative bound in either working space
                    let change = (q - p).abs() / p;
                    assert!(change <= fraction * (1.0 + 1e-9), "{a} iteration {}: {change} > {fraction}", k + 1);
                }
            }
        }
    }
}

#[test]
fn lsqp_is_invariant_to_power_of_two_scaling() {
    for name in [BenchmarkName::Boyd, BenchmarkName::Floudas] {
        let case = name.case();
        let n = case.problem.n_vars();
        let s: Vec<f64> = (0..n).map(|i| 2f64.powi(i as i32 * 3 - 4)).collect();
        let scaled = rescaled(&case.problem, &s);
        let mut config = ExperimentConfig::new(name, GuessQuality::Good);
        config.trials_per_cell = 5;
        for x0 in initial_guesses(&case, &config) {
            let z0: Vec<f64> = x0.iter().zip(&s).map(|(x, s)| x / s).collect();
            let a = Algorithm::Lsqp.solve(&case.problem, &x0, &case.lsqp_options).unwrap();
            let b = Algorithm::Lsqp.solve(&scaled, &z0, &case.lsqp_options).unwrap();
            assert_eq!(a.termination, b.termination, "{name}");
            assert_eq!(a.iterations, b.iterations, "{name}");
            for i in 0..n {
                assert_relative_eq!(a.x_final[i], b.x_final[i] * s[i], max_relative = 1e-8);
            }
        }
    }
}

#[test]
fn solves_are_deterministic() {
    let case = BenchmarkName::KirschenOzturk.case();
    let mut config = ExperimentConfig::new(BenchmarkName::KirschenOzturk, GuessQuality::Poor);
    config.trials_per_cell = 3;
    for x0 in initial_guesses(&case, &config) {
        for a in Algorithm::BOTH {
            let first = a.solve(&case.problem, &x0, case.default_options(a)).unwrap();
            let second = a.solve(&case.problem, &x0, case.default_options(a)).unwrap();
            assert_eq!(first, second);
        }
    }
}

#[test]
fn lsqp_refuses_nonpositive_start() {
    let case = BenchmarkName::Floudas.case();
    let x0 = common::floudas_g1_nonpositive_point();
    let r = Algorithm::Lsqp.solve(&case.problem, &x0, &case.lsqp_options).unwrap();
    assert_eq!((r.termination, r.iterations), (Termination::TransformFailure, 0));
    assert!(r.transform_failure.unwrap().contains(FunctionId::Inequality(0)));
    // original-space SQP has no such restriction
    let r = Algorithm::Sqp.solve(&case.problem, &x0, &case.sqp_options).unwrap();
    assert_ne!(r.termination, Termination::TransformFailure);
}

#[test]
fn invalid_inputs_are_errors() {
    let case = BenchmarkName::Boyd.case();
    let bad = SolverOptions { max_iter: 0, ..Default::default() };
    assert!(Algorithm::Lsqp.solve(&case.problem, &[3.0, 6.0, 12.0], &bad).is_err());
    assert!(Algorithm::Sqp.solve(&case.problem, &[3.0, 6.0], &SolverOptions::default()).is_err());
    let fractions = SolverOptions { trust_fractions: vec![1.5], ..Default::default() };
    assert!(Algorithm::Sqp.solve(&case.problem, &[3.0, 6.0, 12.0], &fractions).is_err());
}

#[test]
fn max_iter_is_respected() {
    let case = BenchmarkName::Floudas.case();
    let opts = SolverOptions { max_iter: 2, ..Default::default() };
    let r = Algorithm::Sqp.solve(&case.problem, &[500.0, 1500.0, 5000.0, 150.0, 250.0, 250.0, 300.0, 350.0], &opts)
        .unwrap();
    assert_eq!((r.termination, r.iterations), (Termination::MaxIter, 2));
    assert_eq!(r.trace.len(), 3);
}
