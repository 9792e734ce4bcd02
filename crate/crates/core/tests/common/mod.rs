//! Oracles shared by the integration tests. Nothing here calls into the
//! solvers; the checks are recomputed from first principles.
#![allow(dead_code)]

use lsqp::bfgs::{damped_bfgs_update, BfgsState};
use lsqp::gp::{monomial_approximation, Monomial, Posynomial};
use lsqp::harness::sample_in_box;
use lsqp::problem::{evaluate_point, FunctionId, Problem};
use lsqp::qp::{solve_qp, QpData, QpStatus};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Central difference with relative step `1e-6`.
pub fn fd_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-6 * x[i].abs().max(1e-12);
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (up[i] - dn[i])
        })
        .collect()
}

/// `max_i |a_i - b_i| / max(|b|_inf, tiny)`: relative to the gradient's scale,
/// so vanishing components do not blow the ratio up.
pub fn rel_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

/// Largest relative error between analytic and finite-difference gradients
/// of every function of `problem` at `x`, in original coordinates.
pub fn original_gradient_error(problem: &Problem, x: &[f64]) -> f64 {
    problem
        .function_ids()
        .map(|id| {
            let func = problem.function(id);
            let (_, g) = func.eval(x);
            rel_error(&g, &fd_gradient(|p| func.value(p), x))
        })
        .fold(0.0, f64::max)
}

/// Same in logspace: the map `x_i / F * dF/dx_i` against differences of
/// `log F(exp(y))` in `y`.
pub fn log_gradient_error(problem: &Problem, x: &[f64]) -> f64 {
    let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ev = evaluate_point(problem, x).unwrap();
    problem
        .function_ids()
        .map(|id| {
            let func = problem.function(id);
            let v = ev.value(id);
            let g = ev.gradient(id);
            let mapped: Vec<f64> = (0..x.len()).map(|i| x[i] / v * g[i]).collect();
            let phi = |yy: &[f64]| {
                let xx: Vec<f64> = yy.iter().map(|t| t.exp()).collect();
                func.value(&xx).ln()
            };
            rel_error(&mapped, &fd_gradient_abs(phi, &y))
        })
        .fold(0.0, f64::max)
}

/// Central difference with an absolute step (for logspace, where `y` may be 0).
pub fn fd_gradient_abs(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let h = 1e-6;
            let mut up = x.to_vec();
            let mut dn = x.to_vec();
            up[i] += h;
            dn[i] -= h;
            (f(&up) - f(&dn)) / (2.0 * h)
        })
        .collect()
}

/// Points in the `±80%` box around `centre` (clamped to the floors) at which
/// every function is strictly positive.
pub fn positive_points(problem: &Problem, centre: &[f64], count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let x = sample_in_box(centre, problem.lower_bounds(), 0.8, &mut r);
        let ev = evaluate_point(problem, &x).unwrap();
        if problem.function_ids().all(|id| ev.value(id) > 0.0) {
            out.push(x);
        }
    }
    out
}

pub fn max_violation(problem: &Problem, x: &[f64]) -> f64 {
    let ev = evaluate_point(problem, x).unwrap();
    problem
        .function_ids()
        .map(|id| match id {
            FunctionId::Objective => 0.0,
            FunctionId::Inequality(_) => (ev.value(id) - 1.0).max(0.0),
            FunctionId::Equality(_) => (ev.value(id) - 1.0).abs(),
        })
        .fold(0.0, f64::max)
}

/// A random strictly convex QP with consistent constraints, plus a point
/// that satisfies them.
pub struct RandomQp {
    pub qp: QpData,
    pub feasible: DVector<f64>,
}

pub fn random_qp<R: Rng>(r: &mut R) -> RandomQp {
    let n = r.gen_range(1..=5);
    let n_in = r.gen_range(0..=6);
    let n_eq = r.gen_range(0..n.min(3));
    let mut u = |rows: usize, cols: usize| DMatrix::from_fn(rows, cols, |_, _| r.gen_range(-1.0..1.0));
    let l = u(n, n);
    let h = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
    let c = DVector::from_iterator(n, u(n, 1).iter().copied()) * 3.0;
    let a_ineq = u(n_in, n);
    let a_eq = u(n_eq, n);
    let feasible = DVector::from_iterator(n, u(n, 1).iter().copied());
    let slack = DVector::from_iterator(n_in, u(n_in, 1).iter().map(|v: &f64| v.abs()));
    let b_ineq = -(&a_ineq * &feasible) - slack;
    let b_eq = -(&a_eq * &feasible);
    RandomQp { qp: QpData { h, c, a_ineq, b_ineq, a_eq, b_eq }, feasible }
}

/// Independent KKT residual: stationarity, primal and dual feasibility and
/// complementarity, all in the infinity norm.
pub fn independent_kkt(qp: &QpData, d: &DVector<f64>, mu_in: &DVector<f64>, mu_eq: &DVector<f64>) -> f64 {
    let mut r = 0.0f64;
    let stat = &qp.h * d + &qp.c + qp.a_ineq.transpose() * mu_in + qp.a_eq.transpose() * mu_eq;
    for v in stat.iter() {
        r = r.max(v.abs());
    }
    let s = &qp.a_ineq * d + &qp.b_ineq;
    for i in 0..s.len() {
        r = r.max(s[i].max(0.0)).max((-mu_in[i]).max(0.0)).max((mu_in[i] * s[i]).abs());
    }
    let e = &qp.a_eq * d + &qp.b_eq;
    for v in e.iter() {
        r = r.max(v.abs());
    }
    r
}

/// Worst KKT residual over `count` random QPs; any non-optimal status counts as infinite.
pub fn qp_property_suite(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let inst = random_qp(&mut r);
        match solve_qp(&inst.qp) {
            Ok(sol) if sol.status == QpStatus::Optimal => {
                worst = worst.max(independent_kkt(&inst.qp, &sol.d, &sol.mu_ineq, &sol.mu_eq));
            }
            _ => return f64::INFINITY,
        }
    }
    worst
}

/// Smallest eigenvalue seen over `chains` short runs of `per_chain` random
/// damped updates (dimension 2..=6, each run starting from a random
/// well-conditioned PD matrix), and whether every matrix stayed symmetric.
///
/// Runs are kept short on purpose: a damped update sets the curvature along
/// `s` to a fifth of its old value, so long chains of adversarial `(s, y)`
/// drive the condition number past `1/eps` and f64 can no longer tell PD
/// from singular, whatever the update formula.
pub fn bfgs_property_suite(chains: usize, per_chain: usize, seed: u64) -> (f64, bool) {
    let mut r = rng(seed);
    let mut min_eig = f64::INFINITY;
    let mut symmetric = true;
    for _ in 0..chains {
        let n = r.gen_range(2..=6);
        let l = DMatrix::from_fn(n, n, |_, _| r.gen_range(-1.0..1.0));
        let mut state = BfgsState::identity(n);
        state.b = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
        for _ in 0..per_chain {
            let s = DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
            let y = DVector::from_fn(n, |_, _| r.gen_range(-1.0..1.0));
            state = damped_bfgs_update(&state, &s, &y).0;
            let b = &state.b;
            symmetric &= (b - b.transpose()).amax() <= 1e-12 * b.amax().max(1.0);
            let eig = b.clone().symmetric_eigen().eigenvalues.min();
            min_eig = min_eig.min(eig);
            if b.clone().cholesky().is_none() {
                return (f64::NEG_INFINITY, symmetric);
            }
        }
    }
    (min_eig, symmetric)
}

/// Worst residual of `log m(exp(y))` against the line through two random `y`.
pub fn monomial_affinity_suite(count: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let mut worst = 0.0f64;
    for _ in 0..count {
        let n = r.gen_range(1..=4);
        let m = Monomial::new(r.gen_range(0.1..10.0), (0..n).map(|_| r.gen_range(-3.0..3.0)).collect());
        let y0: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let y1: Vec<f64> = (0..n).map(|_| r.gen_range(-2.0..2.0)).collect();
        let t: f64 = r.gen_range(0.0..1.0);
        let at = |y: &[f64]| m.value(&y.iter().map(|v| v.exp()).collect::<Vec<_>>()).ln();
        let yt: Vec<f64> = y0.iter().zip(&y1).map(|(a, b)| a + t * (b - a)).collect();
        let interp = (1.0 - t) * at(&y0) + t * at(&y1);
        // slope must equal the exponent vector
        let slope: f64 = m.exponents.iter().zip(y1.iter().zip(&y0)).map(|(a, (b, c))| a * (b - c)).sum();
        worst = worst.max((at(&yt) - interp).abs()).max((at(&y1) - at(&y0) - slope).abs());
    }
    worst
}

/// Tangency error at `x_k` and the largest `m(x) - n(x)` over random `x` for
/// random posynomials (at most 4 terms, 3 variables).
pub fn monomial_approximation_suite(posynomials: usize, samples: usize, seed: u64) -> (f64, f64) {
    let mut r = rng(seed);
    let mut tangency = 0.0f64;
    let mut overshoot = f64::NEG_INFINITY;
    for _ in 0..posynomials {
        let n = r.gen_range(1..=3);
        let terms = (0..r.gen_range(1..=4))
            .map(|_| Monomial::new(r.gen_range(0.1..5.0), (0..n).map(|_| r.gen_range(-2.0..2.0)).collect()))
            .collect();
        let p = Posynomial::new(terms);
        let xk: Vec<f64> = (0..n).map(|_| r.gen_range(0.2..5.0)).collect();
        let m = monomial_approximation(&p, &xk);
        let (pv, pg) = p.eval(&xk);
        let (mv, mg) = m.eval(&xk);
        tangency = tangency.max((pv - mv).abs() / pv).max(rel_error(&mg, &pg));
        for _ in 0..samples {
            let x: Vec<f64> = (0..n).map(|_| r.gen_range(0.01..100.0)).collect();
            let (pv, _) = p.eval(&x);
            overshoot = overshoot.max((m.value(&x) - pv) / pv);
        }
    }
    (tangency, overshoot)
}

/// A point where the Floudas problem's first constraint is `<= 0`: walk from
/// the optimum along `-grad g1` in unit steps (gradient scaled to unit
/// infinity norm) until `g1` changes sign while `x` stays positive.
pub fn floudas_g1_nonpositive_point() -> Vec<f64> {
    let case = lsqp::benchmarks::BenchmarkName::Floudas.case();
    let x_star = &case.known_optimum.x_star;
    let g1 = &case.problem.ineq_constraints()[0];
    let (_, grad) = g1.eval(x_star);
    let scale = grad.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for k in 1..10_000 {
        let t = k as f64;
        let x: Vec<f64> = x_star.iter().zip(&grad).map(|(x, g)| x - t * g / scale).collect();
        if x.iter().any(|v| *v <= 1.0) {
            break;
        }
        if g1.value(&x) <= 0.0 {
            return x;
        }
    }
    panic!("no positive point with g1 <= 0 along -grad g1");
}
