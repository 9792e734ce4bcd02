//! Rewriting raw `(lhs, relation, rhs)` constraints so the right-hand side is one.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::problem::{Problem, ProblemError, ScalarFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

/// One side of a raw constraint.
#[derive(Debug, Clone)]
pub enum Side {
    Constant(f64),
    /// A single term known to be strictly positive on the domain, such as a
    /// variable or a monomial. Dividing by it never flips the relation.
    Term(ScalarFunction),
    /// Any other expression; its sign is unknown.
    Expression(ScalarFunction),
}

impl Side {
    fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Side::Constant(c) => (*c, vec![0.0; x.len()]),
            Side::Term(f) | Side::Expression(f) => f.eval(x),
        }
    }

    fn is_constant(&self) -> bool {
        matches!(self, Side::Constant(_))
    }
}

#[derive(Debug, Clone)]
pub struct RawConstraint {
    pub lhs: Side,
    pub relation: Relation,
    pub rhs: Side,
}

impl RawConstraint {
    pub fn new(lhs: Side, relation: Relation, rhs: Side) -> Self {
        Self { lhs, relation, rhs }
    }

    /// Truth value of the raw constraint at `x`.
    pub fn is_satisfied(&self, x: &[f64]) -> bool {
        let l = self.lhs.eval(x).0;
        let r = self.rhs.eval(x).0;
        match self.relation {
            Relation::Le => l <= r,
            Relation::Ge => l >= r,
            Relation::Eq => l == r,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RawProblemDescription {
    pub n_vars: usize,
    pub variable_names: Option<Vec<String>>,
    pub lower_bounds: Option<Vec<f64>>,
    pub objective: ScalarFunction,
    pub constraints: Vec<RawConstraint>,
}

/// How a constraint was brought to unit right-hand side.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Normalization {
    /// `lhs / c` for a nonzero constant `c`.
    ConstantDivision,
    /// `lhs / rhs` for a strictly positive single-term `rhs`.
    Ratio,
    /// `lhs - rhs + 1`.
    Shift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    Inequality,
    Equality,
}

#[derive(Debug, Clone)]
pub struct NormalizedConstraint {
    pub kind: ConstraintKind,
    pub method: Normalization,
    /// `function(x) <= 1` or `function(x) = 1`.
    pub function: ScalarFunction,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StandardFormError {
    #[error("constraint {index}: {reason}")]
    UnnormalizableConstraint { index: usize, reason: String },
    #[error(transparent)]
    Problem(#[from] ProblemError),
}

fn ratio(num: Side, den: ScalarFunction) -> ScalarFunction {
    ScalarFunction::new(move |x| {
        let (n, gn) = num.eval(x);
        let (d, gd) = den.eval(x);
        let grad = gn.iter().zip(&gd).map(|(a, b)| (a * d - n * b) / (d * d)).collect();
        (n / d, grad)
    })
}

fn scaled(f: ScalarFunction, c: f64) -> ScalarFunction {
    ScalarFunction::new(move |x| {
        let (v, g) = f.eval(x);
        (v / c, g.into_iter().map(|gi| gi / c).collect())
    })
}

fn shifted(lhs: Side, rhs: Side) -> ScalarFunction {
    ScalarFunction::new(move |x| {
        let (l, gl) = lhs.eval(x);
        let (r, gr) = rhs.eval(x);
        (l - r + 1.0, gl.iter().zip(&gr).map(|(a, b)| a - b).collect())
    })
}

fn side_function(side: Side) -> Option<ScalarFunction> {
    match side {
        Side::Constant(_) => None,
        Side::Term(f) | Side::Expression(f) => Some(f),
    }
}

/// Rewrites one raw constraint into `f(x) <= 1` or `f(x) = 1`.
pub fn normalize_constraint(
    index: usize,
    raw: &RawConstraint,
) -> Result<NormalizedConstraint, StandardFormError> {
    let fail = |reason: &str| StandardFormError::UnnormalizableConstraint {
        index,
        reason: reason.to_string(),
    };
    for side in [&raw.lhs, &raw.rhs] {
        if let Side::Constant(c) = side {
            if !c.is_finite() {
                return Err(fail("non-finite constant"));
            }
        }
    }
    if raw.lhs.is_constant() && raw.rhs.is_constant() {
        return Err(fail("constraint does not depend on any variable"));
    }

    // Orient as `lhs <= rhs` or `lhs = rhs`, keeping a variable expression on the left.
    let (kind, lhs, rhs) = match raw.relation {
        Relation::Le => (ConstraintKind::Inequality, raw.lhs.clone(), raw.rhs.clone()),
        Relation::Ge => (ConstraintKind::Inequality, raw.rhs.clone(), raw.lhs.clone()),
        Relation::Eq if raw.lhs.is_constant() => {
            (ConstraintKind::Equality, raw.rhs.clone(), raw.lhs.clone())
        }
        Relation::Eq => (ConstraintKind::Equality, raw.lhs.clone(), raw.rhs.clone()),
    };

    let (method, function) = match (&lhs, &rhs) {
        (_, Side::Term(t)) => (Normalization::Ratio, ratio(lhs.clone(), t.clone())),
        (Side::Constant(_), Side::Expression(_)) => (Normalization::Shift, shifted(lhs, rhs)),
        (_, Side::Constant(c)) if *c > 0.0 || (*c != 0.0 && kind == ConstraintKind::Equality) => {
            let f = side_function(lhs.clone()).expect("lhs is non-constant here");
            (Normalization::ConstantDivision, scaled(f, *c))
        }
        (_, Side::Constant(_)) | (_, Side::Expression(_)) => {
            (Normalization::Shift, shifted(lhs, rhs))
        }
    };
    Ok(NormalizedConstraint { kind, method, function })
}

/// Builds a [`Problem`] whose constraints all have a right-hand side of one.
pub fn construct_standard_form(raw: RawProblemDescription) -> Result<Problem, StandardFormError> {
    let mut builder = Problem::builder(raw.n_vars, raw.objective);
    if let Some(lb) = raw.lower_bounds {
        builder = builder.lower_bounds(lb);
    }
    if let Some(names) = raw.variable_names {
        builder = builder.variable_names(names);
    }
    for (index, c) in raw.constraints.iter().enumerate() {
        let normalized = normalize_constraint(index, c)?;
        builder = builder.metadata(format!("constraint.{index}.normalization"), format!("{:?}", normalized.method));
        builder = match normalized.kind {
            ConstraintKind::Inequality => builder.inequality(normalized.function),
            ConstraintKind::Equality => builder.equality(normalized.function),
        };
    }
    Ok(builder.build()?)
}
