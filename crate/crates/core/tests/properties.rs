mod common;

use lsqp::qp::{solve_qp, solve_qp_elastic, QpStatus};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;

#[test]
fn qp_kkt_on_random_instances() {
    let worst = common::qp_property_suite(1000, 1);
    assert!(worst <= 1e-8, "worst KKT residual {worst:e}");
}

/// No feasible point sampled around the solution (on the equality manifold)
/// has a lower objective.
#[test]
fn qp_solution_beats_feasible_samples() {
    let mut r = common::rng(2);
    for _ in 0..50 {
        let inst = common::random_qp(&mut r);
        let qp = &inst.qp;
        let sol = solve_qp(qp).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        let best = qp.objective(&sol.d);

        let n = qp.n();
        let proj = if qp.n_eq() == 0 {
            DMatrix::identity(n, n)
        } else {
            let a = &qp.a_eq;
            let gram = (a * a.transpose()).try_inverse().expect("random equalities are independent");
            DMatrix::identity(n, n) - a.transpose() * gram * a
        };
        let mut checked = 0;
        for k in 0..1000 {
            let radius = 10f64.powi(-(k % 4) as i32);
            let base = if k % 2 == 0 { &sol.d } else { &inst.feasible };
            let z = DVector::from_fn(n, |_, _| r.gen_range(-radius..radius));
            let d = base + &proj * z;
            let slack = &qp.a_ineq * &d + &qp.b_ineq;
            if slack.iter().any(|s| *s > 0.0) {
                continue;
            }
            checked += 1;
            assert!(qp.objective(&d) >= best - 1e-9 * best.abs().max(1.0), "sample beats the solution");
        }
        assert!(checked > 0);
    }
}

#[test]
fn qp_multiplier_signs_and_complementarity() {
    let mut r = common::rng(3);
    for _ in 0..500 {
        let inst = common::random_qp(&mut r);
        let sol = solve_qp(&inst.qp).unwrap();
        let slack = &inst.qp.a_ineq * &sol.d + &inst.qp.b_ineq;
        for (mu, s) in sol.mu_ineq.iter().zip(slack.iter()) {
            assert!(*mu >= 0.0);
            assert!(*s <= 1e-9);
            if *s < -1e-6 {
                assert!(mu.abs() <= 1e-8, "inactive row with multiplier {mu}");
            }
        }
        let recomputed = common::independent_kkt(&inst.qp, &sol.d, &sol.mu_ineq, &sol.mu_eq);
        assert!((recomputed - sol.kkt_residual).abs() <= 1e-12, "{recomputed} vs {}", sol.kkt_residual);
    }
}

#[test]
fn elastic_agrees_on_consistent_instances() {
    let mut r = common::rng(4);
    for _ in 0..200 {
        let inst = common::random_qp(&mut r);
        let plain = solve_qp(&inst.qp).unwrap();
        for penalty in [1e2, 1e4, 1e6] {
            let elastic = solve_qp_elastic(&inst.qp, penalty).unwrap();
            assert!((&plain.d - &elastic.d).amax() <= 1e-7, "penalty {penalty}");
            assert!(elastic.slack.amax() <= 1e-9);
        }
    }
}

#[test]
fn damped_bfgs_stays_positive_definite() {
    let (min_eig, symmetric) = common::bfgs_property_suite(1000, 10, 5);
    assert!(symmetric);
    assert!(min_eig > 0.0, "{min_eig}");
}

#[test]
fn monomials_are_log_affine() {
    assert!(common::monomial_affinity_suite(1000, 6) <= 1e-10);
}

#[test]
fn monomial_approximation_is_tangent_underestimator() {
    let (tangency, overshoot) = common::monomial_approximation_suite(200, 1000, 7);
    assert!(tangency <= 1e-10, "{tangency:e}");
    // AM-GM: the fitted monomial never exceeds the posynomial
    assert!(overshoot <= 1e-12, "{overshoot:e}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn unconstrained_qp_is_newton_step(
        diag in proptest::collection::vec(0.1f64..10.0, 1..5),
        seed in any::<u64>(),
    ) {
        let n = diag.len();
        let mut r = common::rng(seed);
        let c = DVector::from_fn(n, |_, _| r.gen_range(-5.0..5.0));
        let h = DMatrix::from_diagonal(&DVector::from_vec(diag.clone()));
        let sol = solve_qp(&lsqp::qp::QpData::unconstrained(h, c.clone())).unwrap();
        for i in 0..n {
            prop_assert!((sol.d[i] + c[i] / diag[i]).abs() <= 1e-12 * (1.0 + (c[i] / diag[i]).abs()));
        }
    }
}
