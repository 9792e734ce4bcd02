//! Monomials, posynomials and signomials.
//!
//! Used to write benchmark functions, to fit local monomial approximations and
//! to estimate how much of a problem is GP-compatible.

use serde::{Deserialize, Serialize};

use crate::problem::ScalarFunction;

/// `c * prod x_i^a_i` with `c > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coefficient: f64,
    pub exponents: Vec<f64>,
}

impl Monomial {
    pub fn new(coefficient: f64, exponents: Vec<f64>) -> Self {
        assert!(coefficient > 0.0, "monomial coefficient must be positive, got {coefficient}");
        Self { coefficient, exponents }
    }

    pub fn constant(c: f64, n: usize) -> Self {
        Self::new(c, vec![0.0; n])
    }

    /// `c * x_i^a`.
    pub fn single(c: f64, n: usize, i: usize, a: f64) -> Self {
        let mut e = vec![0.0; n];
        e[i] = a;
        Self::new(c, e)
    }

    /// `c * prod x_i^a_i` from `(index, exponent)` pairs.
    pub fn from_pairs(c: f64, n: usize, pairs: &[(usize, f64)]) -> Self {
        let mut e = vec![0.0; n];
        for &(i, a) in pairs {
            e[i] += a;
        }
        Self::new(c, e)
    }

    pub fn n_vars(&self) -> usize {
        self.exponents.len()
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        self.exponents
            .iter()
            .zip(x)
            .filter(|(a, _)| **a != 0.0)
            .fold(self.coefficient, |acc, (a, xi)| acc * xi.powf(*a))
    }

    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        eval_monomial(self, x)
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        Monomial::new(
            self.coefficient * other.coefficient,
            self.exponents.iter().zip(&other.exponents).map(|(a, b)| a + b).collect(),
        )
    }

    pub fn div(&self, other: &Monomial) -> Monomial {
        Monomial::new(
            self.coefficient / other.coefficient,
            self.exponents.iter().zip(&other.exponents).map(|(a, b)| a - b).collect(),
        )
    }

    pub fn powf(&self, p: f64) -> Monomial {
        Monomial::new(self.coefficient.powf(p), self.exponents.iter().map(|a| a * p).collect())
    }

    pub fn scale(&self, c: f64) -> Monomial {
        Monomial::new(self.coefficient * c, self.exponents.clone())
    }

    pub fn to_function(&self) -> ScalarFunction {
        let m = self.clone();
        ScalarFunction::new(move |x| m.eval(x))
    }
}

/// Value and gradient of a monomial; `grad_i = a_i * value / x_i`.
pub fn eval_monomial(m: &Monomial, x: &[f64]) -> (f64, Vec<f64>) {
    let v = m.value(x);
    let grad = m.exponents.iter().zip(x).map(|(a, xi)| a * v / xi).collect();
    (v, grad)
}

/// A nonempty sum of monomials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posynomial {
    pub terms: Vec<Monomial>,
}

impl Posynomial {
    pub fn new(terms: Vec<Monomial>) -> Self {
        assert!(!terms.is_empty(), "posynomial needs at least one term");
        Self { terms }
    }

    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let mut value = 0.0;
        let mut grad = vec![0.0; x.len()];
        for t in &self.terms {
            let (v, g) = eval_monomial(t, x);
            value += v;
            grad.iter_mut().zip(&g).for_each(|(a, b)| *a += b);
        }
        (value, grad)
    }

    /// Each term divided by `m`.
    pub fn div_monomial(&self, m: &Monomial) -> Posynomial {
        Posynomial::new(self.terms.iter().map(|t| t.div(m)).collect())
    }

    pub fn to_function(&self) -> ScalarFunction {
        let p = self.clone();
        ScalarFunction::new(move |x| p.eval(x))
    }
}

impl From<Monomial> for Posynomial {
    fn from(m: Monomial) -> Self {
        Posynomial::new(vec![m])
    }
}

/// `p(x) - n(x)` for posynomials `p` and `n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signomial {
    pub positive_part: Posynomial,
    pub negative_part: Option<Posynomial>,
}

impl Signomial {
    pub fn new(positive_part: Posynomial, negative_part: Option<Posynomial>) -> Self {
        Self { positive_part, negative_part }
    }

    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (mut v, mut g) = self.positive_part.eval(x);
        if let Some(n) = &self.negative_part {
            let (nv, ng) = n.eval(x);
            v -= nv;
            g.iter_mut().zip(&ng).for_each(|(a, b)| *a -= b);
        }
        (v, g)
    }

    pub fn to_function(&self) -> ScalarFunction {
        let s = self.clone();
        ScalarFunction::new(move |x| s.eval(x))
    }

    pub fn class(&self) -> ConstraintClass {
        match &self.negative_part {
            Some(_) => ConstraintClass::Signomial,
            None if self.positive_part.terms.len() == 1 => ConstraintClass::Monomial,
            None => ConstraintClass::Posynomial,
        }
    }
}

/// Local monomial fit of `p` at `x_k`: exponents `a_i = x_i / p(x) * dp/dx_i`
/// and the coefficient that reproduces `p(x_k)`.
///
/// The fit touches `p` at `x_k` with matching gradient and lies below it
/// everywhere else.
pub fn monomial_approximation(p: &Posynomial, x_k: &[f64]) -> Monomial {
    let (v, g) = p.eval(x_k);
    let exponents: Vec<f64> = g.iter().zip(x_k).map(|(gi, xi)| xi / v * gi).collect();
    let log_c = v.ln() - exponents.iter().zip(x_k).map(|(a, xi)| a * xi.ln()).sum::<f64>();
    Monomial::new(log_c.exp(), exponents)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintClass {
    Monomial,
    Posynomial,
    Signomial,
    Opaque,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Objective,
    Inequality,
    Equality,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassifiedFunction {
    pub role: Role,
    pub class: ConstraintClass,
}

impl ClassifiedFunction {
    pub fn new(role: Role, class: ConstraintClass) -> Self {
        Self { role, class }
    }

    /// Monomials fit anywhere in a GP; posynomials only as objectives or `<= 1`.
    pub fn is_gp_compatible(&self) -> bool {
        match self.class {
            ConstraintClass::Monomial => true,
            ConstraintClass::Posynomial => self.role != Role::Equality,
            ConstraintClass::Signomial | ConstraintClass::Opaque => false,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub monomial: usize,
    pub posynomial: usize,
    pub signomial: usize,
    pub opaque: usize,
}

impl ClassCounts {
    fn add(&mut self, class: ConstraintClass) {
        match class {
            ConstraintClass::Monomial => self.monomial += 1,
            ConstraintClass::Posynomial => self.posynomial += 1,
            ConstraintClass::Signomial => self.signomial += 1,
            ConstraintClass::Opaque => self.opaque += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.monomial + self.posynomial + self.signomial + self.opaque
    }
}

pub const DEFAULT_COMPATIBILITY_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompatibilityReport {
    pub objective: Option<ConstraintClass>,
    /// Constraint classes, objective excluded.
    pub constraints: ClassCounts,
    /// GP-compatible functions, objective included.
    pub gp_compatible: usize,
    pub total: usize,
    pub fraction: f64,
    pub threshold: f64,
    pub recommend_lsqp: bool,
}

/// Counts GP-compatible functions and recommends LSQP when their share reaches
/// `threshold`. Advisory only.
pub fn gp_compatibility_scan(items: &[ClassifiedFunction], threshold: f64) -> CompatibilityReport {
    let mut constraints = ClassCounts::default();
    let mut objective = None;
    for item in items {
        match item.role {
            Role::Objective => objective = Some(item.class),
            _ => constraints.add(item.class),
        }
    }
    let gp_compatible = items.iter().filter(|i| i.is_gp_compatible()).count();
    let total = items.len();
    let fraction = if total == 0 { 0.0 } else { gp_compatible as f64 / total as f64 };
    CompatibilityReport {
        objective,
        constraints,
        gp_compatible,
        total,
        fraction,
        threshold,
        recommend_lsqp: total > 0 && fraction >= threshold,
    }
}
