//! The four test problems: a Boyd GP, a constrained Rosenbrock, the Floudas heat
//! exchanger, and the Kirschen-Ozturk aircraft sizing problem.
//!
//! All quantities are SI scalars. Constants of the parameterized problems can be
//! overridden from a JSON [`ProblemDescription`].

mod boyd;
mod floudas;
mod kirschen_ozturk;
mod rosenbrock;

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gp::ClassifiedFunction;
use crate::problem::{KnownOptimum, Problem, ProblemError};
use crate::solver::{Algorithm, SolveResult, SolverOptions};

pub use boyd::{boyd_from_table, boyd_problem, BOYD_DEFAULTS};
pub use floudas::floudas_problem;
pub use kirschen_ozturk::{kirschen_ozturk_from_table, kirschen_ozturk_problem, KO_DEFAULTS, REFERENCE as REFERENCE_KO};
pub use rosenbrock::{rosenbrock_problem, ROSENBROCK_TRUST_FRACTIONS};

/// Named constants of a parameterized benchmark.
pub type ConstantTable = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchmarkName {
    Boyd,
    Rosenbrock,
    Floudas,
    KirschenOzturk,
}

impl BenchmarkName {
    pub const ALL: [BenchmarkName; 4] =
        [BenchmarkName::Boyd, BenchmarkName::Rosenbrock, BenchmarkName::Floudas, BenchmarkName::KirschenOzturk];

    pub fn as_str(self) -> &'static str {
        match self {
            BenchmarkName::Boyd => "boyd",
            BenchmarkName::Rosenbrock => "rosenbrock",
            BenchmarkName::Floudas => "floudas",
            BenchmarkName::KirschenOzturk => "kirschen_ozturk",
        }
    }

    pub fn case(self) -> BenchmarkCase {
        match self {
            BenchmarkName::Boyd => boyd_problem(),
            BenchmarkName::Rosenbrock => rosenbrock_problem(),
            BenchmarkName::Floudas => floudas_problem(),
            BenchmarkName::KirschenOzturk => kirschen_ozturk_problem(),
        }
    }
}

impl fmt::Display for BenchmarkName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkName {
    type Err = BenchmarkError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "boyd" => Ok(BenchmarkName::Boyd),
            "rosenbrock" => Ok(BenchmarkName::Rosenbrock),
            "floudas" => Ok(BenchmarkName::Floudas),
            "kirschen_ozturk" | "ko" => Ok(BenchmarkName::KirschenOzturk),
            _ => Err(BenchmarkError::UnknownBenchmark(s.to_string())),
        }
    }
}

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("unknown benchmark {0:?}")]
    UnknownBenchmark(String),
    #[error("missing constants: {}", .0.join(", "))]
    MissingConstants(Vec<String>),
    #[error("unknown variable {0:?} in lower_bounds")]
    UnknownVariable(String),
    #[error("benchmark {0} takes no constants")]
    NotParameterized(BenchmarkName),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("reading problem description: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing problem description: {0}")]
    Json(#[from] serde_json::Error),
}

/// Relative tolerances that decide whether a trial found the reference optimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SuccessTolerances {
    pub objective_rel: f64,
    pub variable_rel: f64,
}

impl Default for SuccessTolerances {
    fn default() -> Self {
        Self { objective_rel: 1e-3, variable_rel: 5e-2 }
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkCase {
    pub name: BenchmarkName,
    pub problem: Problem,
    pub known_optimum: KnownOptimum,
    pub sqp_options: SolverOptions,
    pub lsqp_options: SolverOptions,
    pub success_tolerances: SuccessTolerances,
    /// Structural class of the objective and every constraint.
    pub structure: Vec<ClassifiedFunction>,
    /// Display units per variable, documentation only.
    pub units: Vec<&'static str>,
}

impl BenchmarkCase {
    pub fn default_options(&self, algorithm: Algorithm) -> &SolverOptions {
        match algorithm {
            Algorithm::Sqp => &self.sqp_options,
            Algorithm::Lsqp => &self.lsqp_options,
        }
    }

    pub fn relative_objective_error(&self, f: f64) -> f64 {
        let f_star = self.known_optimum.objective_value;
        (f - f_star) / f_star.abs()
    }

    /// Signed relative error of each variable against the reference point.
    pub fn relative_variable_errors(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.known_optimum.x_star).map(|(v, s)| (v - s) / s.abs()).collect()
    }

    /// Whether a solve converged to the reference optimum.
    pub fn is_success(&self, result: &SolveResult) -> bool {
        result.termination.is_converged() && self.is_near_optimum(&result.x_final, result.f_final)
    }

    pub fn is_near_optimum(&self, x: &[f64], f: f64) -> bool {
        let tol = self.success_tolerances;
        self.relative_objective_error(f).abs() <= tol.objective_rel
            && self.relative_variable_errors(x).iter().all(|e| e.abs() <= tol.variable_rel)
    }
}

/// JSON description of a parameterized benchmark instance.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescription {
    pub benchmark: Option<BenchmarkName>,
    #[serde(default)]
    pub constants: ConstantTable,
    /// Per-variable floors keyed by variable name.
    #[serde(default)]
    pub lower_bounds: BTreeMap<String, f64>,
}

impl ProblemDescription {
    pub fn from_json(text: &str) -> Result<Self, BenchmarkError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, BenchmarkError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Builds `name` with constants from this description layered over the defaults.
    pub fn build(&self, name: BenchmarkName) -> Result<BenchmarkCase, BenchmarkError> {
        let mut case = match name {
            BenchmarkName::Boyd => boyd_from_table(&merged(&BOYD_DEFAULTS, &self.constants))?,
            BenchmarkName::KirschenOzturk => kirschen_ozturk_from_table(&merged(&KO_DEFAULTS, &self.constants))?,
            other if self.constants.is_empty() => other.case(),
            other => return Err(BenchmarkError::NotParameterized(other)),
        };
        if !self.lower_bounds.is_empty() {
            let names = case.problem.variable_names().to_vec();
            let mut lb = case.problem.lower_bounds().to_vec();
            for (var, value) in &self.lower_bounds {
                let i = names
                    .iter()
                    .position(|n| n == var)
                    .ok_or_else(|| BenchmarkError::UnknownVariable(var.clone()))?;
                lb[i] = *value;
            }
            case.problem = case.problem.with_lower_bounds(lb)?;
        }
        Ok(case)
    }
}

fn merged(defaults: &[(&str, f64)], overrides: &ConstantTable) -> ConstantTable {
    let mut t: ConstantTable = defaults.iter().map(|(k, v)| (k.to_string(), *v)).collect();
    t.extend(overrides.iter().map(|(k, v)| (k.clone(), *v)));
    t
}

/// Looks up every key of `keys`, reporting all missing ones at once.
pub(crate) fn require<const N: usize>(table: &ConstantTable, keys: [&str; N]) -> Result<[f64; N], BenchmarkError> {
    let missing: Vec<String> = keys.iter().filter(|k| !table.contains_key(**k)).map(|k| k.to_string()).collect();
    if !missing.is_empty() {
        return Err(BenchmarkError::MissingConstants(missing));
    }
    Ok(keys.map(|k| table[k]))
}
