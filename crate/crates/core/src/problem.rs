//! Nonlinear programs in logspace-ready standard form.
//!
//! Every constraint is stored with a right-hand side of one: `g_i(x) <= 1`
//! and `h_j(x) = 1`. Objective and constraints are opaque evaluators that
//! return a value together with its gradient; solvers never look inside them.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default strictly positive floor applied to every variable.
pub const DEFAULT_LOWER_BOUND: f64 = 1e-6;

type Evaluator = dyn Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync;

/// A black-box scalar function returning `(value, gradient)`.
#[derive(Clone)]
pub struct ScalarFunction {
    eval: Arc<Evaluator>,
}

impl ScalarFunction {
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(&[f64]) -> (f64, Vec<f64>) + Send + Sync + 'static,
    {
        Self { eval: Arc::new(f) }
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.eval)(x)
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.eval(x).0
    }
}

impl fmt::Debug for ScalarFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("ScalarFunction(..)")
    }
}

/// Identifies one function of a problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FunctionId {
    Objective,
    Inequality(usize),
    Equality(usize),
}

impl fmt::Display for FunctionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FunctionId::Objective => write!(f, "objective"),
            FunctionId::Inequality(i) => write!(f, "g[{i}]"),
            FunctionId::Equality(j) => write!(f, "h[{j}]"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("problem must have at least one variable")]
    NoVariables,
    #[error("expected {expected} entries, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("lower bound for variable {index} must be strictly positive, got {value}")]
    NonPositiveBound { index: usize, value: f64 },
    #[error("x[{index}] = {value} lies below its lower bound {bound}")]
    BelowLowerBound { index: usize, value: f64, bound: f64 },
    #[error("{function} returned a gradient of length {actual}, expected {expected}")]
    GradientLength { function: FunctionId, expected: usize, actual: usize },
    #[error("{function} produced a non-finite value or gradient")]
    NonFiniteEvaluation { function: FunctionId },
}

/// A nonlinear program `min f(x) s.t. g_i(x) <= 1, h_j(x) = 1, x >= lb > 0`.
#[derive(Debug, Clone)]
pub struct Problem {
    n_vars: usize,
    objective: ScalarFunction,
    ineq: Vec<ScalarFunction>,
    eq: Vec<ScalarFunction>,
    lower_bounds: Vec<f64>,
    variable_names: Vec<String>,
    metadata: BTreeMap<String, String>,
}

impl Problem {
    /// Starts a problem over `n_vars` variables with the default floors.
    pub fn builder(n_vars: usize, objective: ScalarFunction) -> ProblemBuilder {
        ProblemBuilder {
            n_vars,
            objective,
            ineq: Vec::new(),
            eq: Vec::new(),
            lower_bounds: vec![DEFAULT_LOWER_BOUND; n_vars],
            variable_names: (0..n_vars).map(|i| format!("x{}", i + 1)).collect(),
            metadata: BTreeMap::new(),
        }
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn n_ineq(&self) -> usize {
        self.ineq.len()
    }

    pub fn n_eq(&self) -> usize {
        self.eq.len()
    }

    pub fn objective(&self) -> &ScalarFunction {
        &self.objective
    }

    pub fn ineq_constraints(&self) -> &[ScalarFunction] {
        &self.ineq
    }

    pub fn eq_constraints(&self) -> &[ScalarFunction] {
        &self.eq
    }

    pub fn function(&self, id: FunctionId) -> &ScalarFunction {
        match id {
            FunctionId::Objective => &self.objective,
            FunctionId::Inequality(i) => &self.ineq[i],
            FunctionId::Equality(j) => &self.eq[j],
        }
    }

    /// Objective first, then inequalities, then equalities.
    pub fn function_ids(&self) -> impl Iterator<Item = FunctionId> + '_ {
        std::iter::once(FunctionId::Objective)
            .chain((0..self.ineq.len()).map(FunctionId::Inequality))
            .chain((0..self.eq.len()).map(FunctionId::Equality))
    }

    pub fn lower_bounds(&self) -> &[f64] {
        &self.lower_bounds
    }

    pub fn variable_names(&self) -> &[String] {
        &self.variable_names
    }

    /// Same problem with new variable floors.
    pub fn with_lower_bounds(self, lower_bounds: Vec<f64>) -> Result<Problem, ProblemError> {
        ProblemBuilder {
            n_vars: self.n_vars,
            objective: self.objective,
            ineq: self.ineq,
            eq: self.eq,
            lower_bounds,
            variable_names: self.variable_names,
            metadata: self.metadata,
        }
        .build()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    /// Checks length and floors of a candidate point.
    pub fn check_point(&self, x: &[f64]) -> Result<(), ProblemError> {
        if x.len() != self.n_vars {
            return Err(ProblemError::DimensionMismatch { expected: self.n_vars, actual: x.len() });
        }
        for (index, (&value, &bound)) in x.iter().zip(&self.lower_bounds).enumerate() {
            if !(value >= bound) {
                return Err(ProblemError::BelowLowerBound { index, value, bound });
            }
        }
        Ok(())
    }

    /// Evaluates the objective and every constraint at `x`.
    pub fn evaluate(&self, x: &[f64]) -> Result<Evaluation, ProblemError> {
        evaluate_point(self, x)
    }
}

pub struct ProblemBuilder {
    n_vars: usize,
    objective: ScalarFunction,
    ineq: Vec<ScalarFunction>,
    eq: Vec<ScalarFunction>,
    lower_bounds: Vec<f64>,
    variable_names: Vec<String>,
    metadata: BTreeMap<String, String>,
}

impl ProblemBuilder {
    /// Adds `g(x) <= 1`.
    pub fn inequality(mut self, g: ScalarFunction) -> Self {
        self.ineq.push(g);
        self
    }

    /// Adds `h(x) = 1`.
    pub fn equality(mut self, h: ScalarFunction) -> Self {
        self.eq.push(h);
        self
    }

    pub fn lower_bounds(mut self, lb: Vec<f64>) -> Self {
        self.lower_bounds = lb;
        self
    }

    pub fn variable_names<S: Into<String>>(mut self, names: impl IntoIterator<Item = S>) -> Self {
        self.variable_names = names.into_iter().map(Into::into).collect();
        self
    }

    pub fn metadata(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }

    pub fn build(self) -> Result<Problem, ProblemError> {
        if self.n_vars == 0 {
            return Err(ProblemError::NoVariables);
        }
        if self.lower_bounds.len() != self.n_vars {
            return Err(ProblemError::DimensionMismatch {
                expected: self.n_vars,
                actual: self.lower_bounds.len(),
            });
        }
        if self.variable_names.len() != self.n_vars {
            return Err(ProblemError::DimensionMismatch {
                expected: self.n_vars,
                actual: self.variable_names.len(),
            });
        }
        for (index, &value) in self.lower_bounds.iter().enumerate() {
            if !(value > 0.0) || !value.is_finite() {
                return Err(ProblemError::NonPositiveBound { index, value });
            }
        }
        Ok(Problem {
            n_vars: self.n_vars,
            objective: self.objective,
            ineq: self.ineq,
            eq: self.eq,
            lower_bounds: self.lower_bounds,
            variable_names: self.variable_names,
            metadata: self.metadata,
        })
    }
}

/// Values and gradients of every problem function at one point.
///
/// Gradient matrices hold one row per constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub x: DVector<f64>,
    pub f: f64,
    pub grad_f: DVector<f64>,
    pub g: DVector<f64>,
    pub grad_g: DMatrix<f64>,
    pub h: DVector<f64>,
    pub grad_h: DMatrix<f64>,
}

impl Evaluation {
    pub fn value(&self, id: FunctionId) -> f64 {
        match id {
            FunctionId::Objective => self.f,
            FunctionId::Inequality(i) => self.g[i],
            FunctionId::Equality(j) => self.h[j],
        }
    }

    pub fn gradient(&self, id: FunctionId) -> DVector<f64> {
        match id {
            FunctionId::Objective => self.grad_f.clone(),
            FunctionId::Inequality(i) => self.grad_g.row(i).transpose(),
            FunctionId::Equality(j) => self.grad_h.row(j).transpose(),
        }
    }

    pub fn function_ids(&self) -> impl Iterator<Item = FunctionId> {
        std::iter::once(FunctionId::Objective)
            .chain((0..self.g.len()).map(FunctionId::Inequality))
            .chain((0..self.h.len()).map(FunctionId::Equality))
    }

    /// Largest violation of `g <= 1` and `h = 1` in original units.
    pub fn constraint_violation(&self) -> f64 {
        let ineq = self.g.iter().map(|&g| (g - 1.0).max(0.0));
        let eq = self.h.iter().map(|&h| (h - 1.0).abs());
        ineq.chain(eq).fold(0.0, f64::max)
    }
}

fn eval_checked(
    function: FunctionId,
    sf: &ScalarFunction,
    x: &[f64],
) -> Result<(f64, Vec<f64>), ProblemError> {
    let (value, grad) = sf.eval(x);
    if grad.len() != x.len() {
        return Err(ProblemError::GradientLength {
            function,
            expected: x.len(),
            actual: grad.len(),
        });
    }
    if !value.is_finite() || grad.iter().any(|v| !v.is_finite()) {
        return Err(ProblemError::NonFiniteEvaluation { function });
    }
    Ok((value, grad))
}

/// Evaluates the objective and all constraints, with gradients, at `x`.
pub fn evaluate_point(problem: &Problem, x: &[f64]) -> Result<Evaluation, ProblemError> {
    problem.check_point(x)?;
    let n = problem.n_vars;
    let (f, gf) = eval_checked(FunctionId::Objective, &problem.objective, x)?;

    let mut g = DVector::zeros(problem.ineq.len());
    let mut grad_g = DMatrix::zeros(problem.ineq.len(), n);
    for (i, gi) in problem.ineq.iter().enumerate() {
        let (v, grad) = eval_checked(FunctionId::Inequality(i), gi, x)?;
        g[i] = v;
        grad_g.row_mut(i).copy_from_slice(&grad);
    }

    let mut h = DVector::zeros(problem.eq.len());
    let mut grad_h = DMatrix::zeros(problem.eq.len(), n);
    for (j, hj) in problem.eq.iter().enumerate() {
        let (v, grad) = eval_checked(FunctionId::Equality(j), hj, x)?;
        h[j] = v;
        grad_h.row_mut(j).copy_from_slice(&grad);
    }

    Ok(Evaluation {
        x: DVector::from_column_slice(x),
        f,
        grad_f: DVector::from_vec(gf),
        g,
        grad_g,
        h,
        grad_h,
    })
}

/// Functions whose value is not strictly positive at an evaluated point.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub offending: Vec<(FunctionId, f64)>,
}

impl PositivityReport {
    pub fn is_log_transformable(&self) -> bool {
        self.offending.is_empty()
    }

    pub fn contains(&self, id: FunctionId) -> bool {
        self.offending.iter().any(|(f, _)| *f == id)
    }
}

impl fmt::Display for PositivityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.offending.is_empty() {
            return f.write_str("all functions positive");
        }
        let parts: Vec<String> =
            self.offending.iter().map(|(id, v)| format!("{id} = {v:.6e}")).collect();
        f.write_str(&parts.join(", "))
    }
}

/// Lists every function of `ev` whose value is `<= 0`.
pub fn check_positivity(ev: &Evaluation) -> PositivityReport {
    let offending = ev
        .function_ids()
        .filter_map(|id| {
            let v = ev.value(id);
            (v <= 0.0).then_some((id, v))
        })
        .collect();
    PositivityReport { offending }
}

/// A published optimum for a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownOptimum {
    pub objective_value: f64,
    pub x_star: Vec<f64>,
    /// Values exactly as printed in the reference tables, in variable order.
    pub published: Vec<f64>,
}
