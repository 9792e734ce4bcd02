//! Dense convex QP sub-problem solver.
//!
//! Solves
//!
//! ```text
//! min  1/2 d'Hd + c'd
//! s.t. A_ineq d + b_ineq <= 0
//!      A_eq   d + b_eq    = 0
//! ```
//!
//! for positive definite `H` with a dual active-set method: start from the
//! unconstrained minimizer and add violated constraints one at a time, dropping
//! any active inequality whose multiplier would turn negative. Every step solves
//! the KKT system of the current working set directly, which is cheap at the
//! sizes produced by the SQP drivers and avoids factor updating.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq)]
pub struct QpData {
    pub h: DMatrix<f64>,
    pub c: DVector<f64>,
    /// Rows encode `a'd + b <= 0`.
    pub a_ineq: DMatrix<f64>,
    pub b_ineq: DVector<f64>,
    /// Rows encode `a'd + b = 0`.
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
}

impl QpData {
    pub fn unconstrained(h: DMatrix<f64>, c: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            h,
            c,
            a_ineq: DMatrix::zeros(0, n),
            b_ineq: DVector::zeros(0),
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
        }
    }

    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.b_ineq.len()
    }

    pub fn n_eq(&self) -> usize {
        self.b_eq.len()
    }

    pub fn objective(&self, d: &DVector<f64>) -> f64 {
        0.5 * d.dot(&(&self.h * d)) + self.c.dot(d)
    }

    fn check_dimensions(&self) -> Result<(), QpError> {
        let n = self.n();
        let mismatch = |what: &'static str| Err(QpError::DimensionMismatch(what));
        if self.h.nrows() != n || self.h.ncols() != n {
            return mismatch("H must be n x n");
        }
        if self.a_ineq.ncols() != n || self.a_ineq.nrows() != self.b_ineq.len() {
            return mismatch("A_ineq must be N x n with N = len(b_ineq)");
        }
        if self.a_eq.ncols() != n || self.a_eq.nrows() != self.b_eq.len() {
            return mismatch("A_eq must be M x n with M = len(b_eq)");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub d: DVector<f64>,
    pub mu_ineq: DVector<f64>,
    pub mu_eq: DVector<f64>,
    pub status: QpStatus,
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Elastic slacks, inequality rows first then equality rows. All zero for
    /// [`solve_qp`].
    pub slack: DVector<f64>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(&'static str),
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("elastic penalty must be positive and finite, got {0}")]
    InvalidPenalty(f64),
}

/// KKT residual of a candidate primal/dual pair: the largest of stationarity,
/// primal infeasibility, dual infeasibility and complementarity violations.
pub fn kkt_residual(
    qp: &QpData,
    d: &DVector<f64>,
    mu_ineq: &DVector<f64>,
    mu_eq: &DVector<f64>,
) -> f64 {
    let grad = &qp.h * d + &qp.c + qp.a_ineq.tr_mul(mu_ineq) + qp.a_eq.tr_mul(mu_eq);
    let mut r = grad.amax();
    let s_in = &qp.a_ineq * d + &qp.b_ineq;
    for i in 0..s_in.len() {
        r = r.max(s_in[i].max(0.0)).max((-mu_ineq[i]).max(0.0)).max((mu_ineq[i] * s_in[i]).abs());
    }
    let s_eq = &qp.a_eq * d + &qp.b_eq;
    if s_eq.len() > 0 {
        r = r.max(s_eq.amax());
    }
    r
}

/// Largest acceptable relative KKT residual for an optimal solve.
pub const KKT_ACCEPT: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
enum RowRef {
    Ineq(usize),
    /// Equality row with the orientation used when it entered the working set.
    Eq(usize, f64),
}

struct Rows<'a> {
    qp: &'a QpData,
}

impl Rows<'_> {
    fn normal(&self, r: RowRef) -> DVector<f64> {
        match r {
            RowRef::Ineq(i) => self.qp.a_ineq.row(i).transpose(),
            RowRef::Eq(j, s) => self.qp.a_eq.row(j).transpose() * s,
        }
    }

    fn offset(&self, r: RowRef) -> f64 {
        match r {
            RowRef::Ineq(i) => self.qp.b_ineq[i],
            RowRef::Eq(j, s) => self.qp.b_eq[j] * s,
        }
    }

    fn value(&self, r: RowRef, x: &DVector<f64>) -> f64 {
        self.normal(r).dot(x) + self.offset(r)
    }

    fn tolerance(&self, r: RowRef, x: &DVector<f64>) -> f64 {
        let scale = self.normal(r).amax() * x.amax().max(1.0) + self.offset(r).abs();
        1e-12 * scale.max(1.0)
    }
}

/// Solves the KKT system of the working set:
/// `[H A'; A 0] [z; w] = [rhs_top; rhs_bottom]`.
fn solve_kkt(
    h: &DMatrix<f64>,
    normals: &[DVector<f64>],
    rhs_top: &DVector<f64>,
    rhs_bottom: &DVector<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let n = h.nrows();
    let m = normals.len();
    let mut k = DMatrix::zeros(n + m, n + m);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    for (j, a) in normals.iter().enumerate() {
        for i in 0..n {
            k[(i, n + j)] = a[i];
            k[(n + j, i)] = a[i];
        }
    }
    let mut rhs = DVector::zeros(n + m);
    rhs.rows_mut(0, n).copy_from(rhs_top);
    rhs.rows_mut(n, m).copy_from(rhs_bottom);
    let sol = k.full_piv_lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some((sol.rows(0, n).into_owned(), sol.rows(n, m).into_owned()))
}

struct Working {
    rows: Vec<RowRef>,
    mult: Vec<f64>,
}

impl Working {
    fn position(&self, r: RowRef) -> Option<usize> {
        self.rows.iter().position(|&a| match (a, r) {
            (RowRef::Ineq(i), RowRef::Ineq(k)) => i == k,
            (RowRef::Eq(j, _), RowRef::Eq(k, _)) => j == k,
            _ => false,
        })
    }
}

/// Solves a convex QP with positive definite `H`.
pub fn solve_qp(qp: &QpData) -> Result<QpSolution, QpError> {
    qp.check_dimensions()?;
    if qp.h.iter().chain(qp.c.iter()).chain(qp.a_ineq.iter()).chain(qp.b_ineq.iter())
        .chain(qp.a_eq.iter()).chain(qp.b_eq.iter())
        .any(|v| !v.is_finite())
    {
        return Err(QpError::NumericalBreakdown("non-finite QP data".into()));
    }
    let n = qp.n();
    let (n_in, n_eq) = (qp.n_ineq(), qp.n_eq());
    let chol = qp
        .h
        .clone()
        .cholesky()
        .ok_or_else(|| QpError::NumericalBreakdown("H is not positive definite".into()))?;

    let rows = Rows { qp };
    let mut x = -chol.solve(&qp.c);
    let mut ws = Working { rows: Vec::new(), mult: Vec::new() };
    let cap = 50 * (n + n_in + n_eq).max(1);
    let mut iterations = 0;
    let mut status = QpStatus::Optimal;
    let mut skipped_eq = vec![false; n_eq];

    'outer: loop {
        // Equalities enter first, in index order; then the most violated
        // inequality, ties broken by the lowest index.
        let next_eq = (0..n_eq).find(|&j| !skipped_eq[j] && ws.position(RowRef::Eq(j, 1.0)).is_none());
        let p = if let Some(j) = next_eq {
            let s = rows.value(RowRef::Eq(j, 1.0), &x);
            RowRef::Eq(j, if s < 0.0 { -1.0 } else { 1.0 })
        } else {
            let mut best: Option<(usize, f64)> = None;
            for i in 0..n_in {
                let r = RowRef::Ineq(i);
                if ws.position(r).is_some() {
                    continue;
                }
                let s = rows.value(r, &x);
                if s > rows.tolerance(r, &x) && best.map_or(true, |(_, bs)| s > bs) {
                    best = Some((i, s));
                }
            }
            match best {
                Some((i, _)) => RowRef::Ineq(i),
                None => break 'outer,
            }
        };

        let n_p = rows.normal(p);
        let hinv_np = chol.solve(&n_p);
        let np_scale = n_p.dot(&hinv_np);
        let mut u_p = 0.0;
        loop {
            iterations += 1;
            if iterations > cap {
                status = QpStatus::IterLimit;
                break 'outer;
            }
            let normals: Vec<DVector<f64>> = ws.rows.iter().map(|&r| rows.normal(r)).collect();
            let (mut z, w) = solve_kkt(&qp.h, &normals, &(-&n_p), &DVector::zeros(normals.len()))
                .ok_or_else(|| QpError::NumericalBreakdown("singular working-set KKT matrix".into()))?;
            let zhz = z.dot(&(&qp.h * &z));
            let dependent = zhz <= 1e-13 * np_scale;
            if dependent {
                z.fill(0.0);
            }

            // Dual step length: first active inequality multiplier to hit zero.
            let mut t1 = f64::INFINITY;
            let mut block: Option<usize> = None;
            for (k, &r) in ws.rows.iter().enumerate() {
                if let RowRef::Ineq(idx) = r {
                    if w[k] < 0.0 {
                        let t = -ws.mult[k] / w[k];
                        let better = match block {
                            None => true,
                            Some(b) => {
                                t < t1 || (t == t1 && matches!(ws.rows[b], RowRef::Ineq(bi) if idx < bi))
                            }
                        };
                        if better {
                            t1 = t;
                            block = Some(k);
                        }
                    }
                }
            }

            let s_p = rows.value(p, &x);
            let t2 = if dependent { f64::INFINITY } else { (s_p / zhz).max(0.0) };

            if !t1.is_finite() && !t2.is_finite() {
                if let RowRef::Eq(j, _) = p {
                    // A redundant equality already satisfied can be ignored.
                    if s_p.abs() <= rows.tolerance(p, &x) {
                        skipped_eq[j] = true;
                        continue 'outer;
                    }
                }
                status = QpStatus::Infeasible;
                break 'outer;
            }

            let t = t1.min(t2);
            if !dependent {
                x += &z * t;
            }
            for (m, wk) in ws.mult.iter_mut().zip(w.iter()) {
                *m += t * wk;
            }
            u_p += t;

            if t2 <= t1 {
                ws.rows.push(p);
                ws.mult.push(u_p);
                continue 'outer;
            }
            let k = block.expect("finite t1 has a blocking row");
            ws.rows.remove(k);
            ws.mult.remove(k);
        }
    }

    let mut d = x;
    let mut mu_ineq = DVector::zeros(n_in);
    let mut mu_eq = DVector::zeros(n_eq);
    let scatter = |ws: &Working, mu_ineq: &mut DVector<f64>, mu_eq: &mut DVector<f64>, mult: &[f64]| {
        for (&r, &m) in ws.rows.iter().zip(mult) {
            match r {
                RowRef::Ineq(i) => mu_ineq[i] = m,
                RowRef::Eq(j, s) => mu_eq[j] = s * m,
            }
        }
    };
    scatter(&ws, &mut mu_ineq, &mut mu_eq, &ws.mult);

    if status == QpStatus::Optimal {
        // Re-solve on the final working set to remove accumulated rounding.
        let normals: Vec<DVector<f64>> = ws.rows.iter().map(|&r| rows.normal(r)).collect();
        let offsets = DVector::from_iterator(ws.rows.len(), ws.rows.iter().map(|&r| -rows.offset(r)));
        if let Some((xp, up)) = solve_kkt(&qp.h, &normals, &(-&qp.c), &offsets) {
            let mut mi = DVector::zeros(n_in);
            let mut me = DVector::zeros(n_eq);
            scatter(&ws, &mut mi, &mut me, up.as_slice());
            let before = kkt_residual(qp, &d, &mu_ineq, &mu_eq);
            let after = kkt_residual(qp, &xp, &mi, &me);
            if after <= before {
                d = xp;
                mu_ineq = mi;
                mu_eq = me;
            }
        }
    }

    let kkt = kkt_residual(qp, &d, &mu_ineq, &mu_eq);
    // An "optimal" answer that fails its own KKT check came out of an
    // ill-conditioned solve and is not trustworthy as a search direction.
    let scale = 1.0f64.max(qp.c.amax()).max(qp.b_ineq.amax()).max(qp.b_eq.amax()).max((&qp.h * &d).amax());
    if status == QpStatus::Optimal && !(kkt <= KKT_ACCEPT * scale) {
        return Err(QpError::NumericalBreakdown(format!("KKT residual {kkt:.3e} after solve")));
    }
    Ok(QpSolution {
        d,
        mu_ineq,
        mu_eq,
        status,
        kkt_residual: kkt,
        iterations,
        slack: DVector::zeros(n_in + n_eq),
    })
}

/// Solves the elastic relaxation
///
/// ```text
/// min  1/2 d'Hd + c'd + penalty * (sum v + sum (e+ + e-))
/// s.t. A_ineq d + b_ineq <= v,  A_eq d + b_eq = e+ - e-,  v, e+, e- >= 0
/// ```
///
/// which is feasible for any data. Multipliers refer to the original rows.
pub fn solve_qp_elastic(qp: &QpData, penalty: f64) -> Result<QpSolution, QpError> {
    qp.check_dimensions()?;
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(QpError::InvalidPenalty(penalty));
    }
    let n = qp.n();
    let (n_in, n_eq) = (qp.n_ineq(), qp.n_eq());
    let n_aug = n + n_in + 2 * n_eq;
    // Slack curvature tied to the penalty: the dual method starts from the
    // unconstrained minimizer, where slacks sit at -penalty / reg. The polish
    // below removes the regularization again.
    let h_scale = (0..n).map(|i| qp.h[(i, i)].abs()).fold(1.0, f64::max);
    let reg = (1e-10 * h_scale).max(1e-6 * penalty);

    let mut h = DMatrix::zeros(n_aug, n_aug);
    h.view_mut((0, 0), (n, n)).copy_from(&qp.h);
    for i in n..n_aug {
        h[(i, i)] = reg;
    }
    let mut c = DVector::from_element(n_aug, penalty);
    c.rows_mut(0, n).copy_from(&qp.c);

    let m_in = 2 * n_in + 2 * n_eq;
    let mut a_in = DMatrix::zeros(m_in, n_aug);
    let mut b_in = DVector::zeros(m_in);
    for i in 0..n_in {
        a_in.view_mut((i, 0), (1, n)).copy_from(&qp.a_ineq.row(i));
        a_in[(i, n + i)] = -1.0;
        b_in[i] = qp.b_ineq[i];
    }
    for k in 0..(n_in + 2 * n_eq) {
        a_in[(n_in + k, n + k)] = -1.0;
    }
    let mut a_eq = DMatrix::zeros(n_eq, n_aug);
    for j in 0..n_eq {
        a_eq.view_mut((j, 0), (1, n)).copy_from(&qp.a_eq.row(j));
        a_eq[(j, n + n_in + j)] = -1.0;
        a_eq[(j, n + n_in + n_eq + j)] = 1.0;
    }
    let aug = QpData { h, c, a_ineq: a_in, b_ineq: b_in, a_eq, b_eq: qp.b_eq.clone() };
    let mut sol = solve_qp(&aug)?;

    if sol.status == QpStatus::Optimal {
        // Drop the slack regularization: re-solve the exact elastic problem on
        // the rows active at the regularized solution.
        let mut exact = aug.clone();
        for i in n..n_aug {
            exact.h[(i, i)] = 0.0;
        }
        if let Some(polished) = polish_on_active_set(&exact, &sol) {
            if kkt_residual(&exact, &polished.0, &polished.1, &polished.2)
                <= kkt_residual(&exact, &sol.d, &sol.mu_ineq, &sol.mu_eq)
            {
                sol.d = polished.0;
                sol.mu_ineq = polished.1;
                sol.mu_eq = polished.2;
            }
        }
        sol.kkt_residual = kkt_residual(&exact, &sol.d, &sol.mu_ineq, &sol.mu_eq);
    }

    let d = sol.d.rows(0, n).into_owned();
    let v = sol.d.rows(n, n_in).into_owned();
    let e_plus = sol.d.rows(n + n_in, n_eq).into_owned();
    let e_minus = sol.d.rows(n + n_in + n_eq, n_eq).into_owned();
    let mut slack = DVector::zeros(n_in + n_eq);
    slack.rows_mut(0, n_in).copy_from(&v);
    for j in 0..n_eq {
        slack[n_in + j] = e_plus[j] + e_minus[j];
    }
    Ok(QpSolution {
        d,
        mu_ineq: sol.mu_ineq.rows(0, n_in).into_owned(),
        mu_eq: sol.mu_eq.clone(),
        status: if sol.status == QpStatus::Infeasible { QpStatus::IterLimit } else { sol.status },
        kkt_residual: sol.kkt_residual,
        iterations: sol.iterations,
        slack,
    })
}

type Primal = (DVector<f64>, DVector<f64>, DVector<f64>);

fn polish_on_active_set(qp: &QpData, sol: &QpSolution) -> Option<Primal> {
    let n = qp.n();
    let s_in = &qp.a_ineq * &sol.d + &qp.b_ineq;
    let active: Vec<usize> = (0..qp.n_ineq())
        .filter(|&i| sol.mu_ineq[i] > 0.0 || s_in[i].abs() <= 1e-12 * (1.0 + qp.b_ineq[i].abs()))
        .collect();
    let mut normals = Vec::new();
    let mut offsets = Vec::new();
    for j in 0..qp.n_eq() {
        normals.push(qp.a_eq.row(j).transpose());
        offsets.push(-qp.b_eq[j]);
    }
    for &i in &active {
        normals.push(qp.a_ineq.row(i).transpose());
        offsets.push(-qp.b_ineq[i]);
    }
    let (d, m) = solve_kkt(&qp.h, &normals, &(-&qp.c), &DVector::from_vec(offsets))?;
    let mu_eq = m.rows(0, qp.n_eq()).into_owned();
    let mut mu_ineq = DVector::zeros(qp.n_ineq());
    for (k, &i) in active.iter().enumerate() {
        mu_ineq[i] = m[qp.n_eq() + k];
    }
    debug_assert_eq!(d.len(), n);
    Some((d, mu_ineq, mu_eq))
}
