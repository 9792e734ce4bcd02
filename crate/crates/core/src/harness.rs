//! Monte Carlo comparison of the solvers on one benchmark.
//!
//! Every trial draws its initial guess uniformly and independently per
//! variable from `[x*(1 - delta), x*(1 + delta)]`, redrawing until the
//! objective and every constraint are positive there, since LSQP cannot start
//! anywhere else. Trial `i` uses its own ChaCha8 stream (`seed`, stream `i`),
//! so guesses are shared across algorithms and results do not depend on how
//! trials are spread over workers.

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::benchmarks::{BenchmarkCase, BenchmarkName};
use crate::problem::{check_positivity, evaluate_point};
use crate::solver::{Algorithm, SolveResult, SolverOptions, Termination};

pub const SCHEMA_VERSION: u32 = 1;
pub const SAMPLING: &str = "uniform, independent per variable, redrawn until f, g, h > 0";
/// Draws per trial before giving up on a log-transformable guess.
pub const MAX_DRAWS: usize = 10_000;
pub const ITERATION_CONVENTION: &str = "mean over successful trials";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GuessQuality {
    Good,
    Poor,
}

impl GuessQuality {
    /// Half-width of the sampling box relative to the optimum.
    pub fn delta(self) -> f64 {
        match self {
            GuessQuality::Good => 0.10,
            GuessQuality::Poor => 0.80,
        }
    }
}

impl fmt::Display for GuessQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GuessQuality::Good => "good",
            GuessQuality::Poor => "poor",
        })
    }
}

impl FromStr for GuessQuality {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "good" => Ok(GuessQuality::Good),
            "poor" => Ok(GuessQuality::Poor),
            _ => Err(format!("unknown guess quality {s:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub benchmark: BenchmarkName,
    pub algorithms: Vec<Algorithm>,
    pub trials_per_cell: usize,
    pub guess_quality: GuessQuality,
    pub rng_seed: u64,
    pub max_iter: usize,
    pub worker_count: usize,
    /// Overrides of the benchmark's per-algorithm defaults.
    pub eps_grad_lagrangian: Option<f64>,
    pub eps_step: Option<f64>,
    pub enforce_positivity: Option<bool>,
}

impl ExperimentConfig {
    pub fn new(benchmark: BenchmarkName, guess_quality: GuessQuality) -> Self {
        Self {
            benchmark,
            algorithms: Algorithm::BOTH.to_vec(),
            trials_per_cell: 100,
            guess_quality,
            rng_seed: 0,
            max_iter: 500,
            worker_count: default_workers(),
            eps_grad_lagrangian: None,
            eps_step: None,
            enforce_positivity: None,
        }
    }

    /// The case's options for `algorithm` with this config's overrides applied.
    pub fn options_for(&self, case: &BenchmarkCase, algorithm: Algorithm) -> SolverOptions {
        let mut o = case.default_options(algorithm).clone();
        o.max_iter = self.max_iter;
        if let Some(v) = self.eps_grad_lagrangian {
            o.eps_grad_lagrangian = v;
        }
        if let Some(v) = self.eps_step {
            o.eps_step = v;
        }
        if let Some(v) = self.enforce_positivity {
            o.enforce_positivity_in_linesearch = v;
        }
        o
    }

    fn validate(&self) -> Result<(), HarnessError> {
        if self.trials_per_cell == 0 {
            return Err(HarnessError::InvalidConfig("trials_per_cell must be at least 1".into()));
        }
        if self.algorithms.is_empty() {
            return Err(HarnessError::InvalidConfig("no algorithms selected".into()));
        }
        if self.worker_count == 0 {
            return Err(HarnessError::InvalidConfig("worker_count must be at least 1".into()));
        }
        if self.max_iter == 0 {
            return Err(HarnessError::InvalidConfig("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid experiment config: {0}")]
    InvalidConfig(String),
    #[error("benchmark mismatch: config names {config}, case is {case}")]
    BenchmarkMismatch { config: BenchmarkName, case: BenchmarkName },
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed trial csv: {0}")]
    MalformedCsv(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Outcome {
    Success,
    /// Converged, but not to the reference optimum.
    LocalOptimum,
    MaxIter,
    LineSearchFailure,
    TransformFailure,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::Success,
        Outcome::LocalOptimum,
        Outcome::MaxIter,
        Outcome::LineSearchFailure,
        Outcome::TransformFailure,
    ];

    pub fn classify(case: &BenchmarkCase, result: &SolveResult) -> Outcome {
        match result.termination {
            Termination::GradLagrangian | Termination::SmallStep => {
                if case.is_near_optimum(&result.x_final, result.f_final) {
                    Outcome::Success
                } else {
                    Outcome::LocalOptimum
                }
            }
            Termination::MaxIter => Outcome::MaxIter,
            Termination::LineSearchFailure => Outcome::LineSearchFailure,
            Termination::TransformFailure => Outcome::TransformFailure,
        }
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl FromStr for Outcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Outcome::ALL.into_iter().find(|o| o.to_string() == s).ok_or_else(|| format!("unknown outcome {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial_index: usize,
    pub algorithm: Algorithm,
    pub x0: Vec<f64>,
    pub termination: Termination,
    pub outcome: Outcome,
    pub iterations: usize,
    pub f_final: f64,
    pub x_final: Vec<f64>,
    pub rel_obj_error: f64,
    pub wall_ms: f64,
}

/// Draws one initial guess in the `quality` box around `optimum`, clamped to `floors`.
pub fn sample_initial_guess<R: Rng>(optimum: &[f64], floors: &[f64], quality: GuessQuality, rng: &mut R) -> Vec<f64> {
    sample_in_box(optimum, floors, quality.delta(), rng)
}

pub fn sample_in_box<R: Rng>(optimum: &[f64], floors: &[f64], delta: f64, rng: &mut R) -> Vec<f64> {
    optimum
        .iter()
        .zip(floors)
        .map(|(&x, &lb)| {
            let u: f64 = rng.gen();
            (x * (1.0 - delta + 2.0 * delta * u)).max(lb)
        })
        .collect()
}

/// The RNG for trial `trial_index`, independent of every other trial.
pub fn trial_rng(seed: u64, trial_index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial_index as u64);
    rng
}

/// The common initial guess of trial `trial_index`. Draws are repeated until
/// the point is log-transformable; after [`MAX_DRAWS`] the last draw is kept.
pub fn initial_guess(case: &BenchmarkCase, config: &ExperimentConfig, trial_index: usize) -> Vec<f64> {
    let mut rng = trial_rng(config.rng_seed, trial_index);
    let floors = case.problem.lower_bounds();
    let mut x = Vec::new();
    for _ in 0..MAX_DRAWS {
        x = sample_initial_guess(&case.known_optimum.x_star, floors, config.guess_quality, &mut rng);
        let positive = evaluate_point(&case.problem, &x).map(|ev| check_positivity(&ev).is_log_transformable());
        if positive.unwrap_or(false) {
            break;
        }
    }
    x
}

/// The common initial guesses of an experiment, in trial order.
pub fn initial_guesses(case: &BenchmarkCase, config: &ExperimentConfig) -> Vec<Vec<f64>> {
    (0..config.trials_per_cell).map(|i| initial_guess(case, config, i)).collect()
}

/// Runs one solve and classifies it. Solver errors become `LineSearchFailure`
/// records rather than propagating.
pub fn run_trial(
    case: &BenchmarkCase,
    algorithm: Algorithm,
    trial_index: usize,
    x0: &[f64],
    options: &SolverOptions,
) -> TrialRecord {
    let start = Instant::now();
    let result = algorithm.solve(&case.problem, x0, options);
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (termination, outcome, iterations, f_final, x_final) = match result {
        Ok(r) => (r.termination, Outcome::classify(case, &r), r.iterations, r.f_final, r.x_final),
        Err(_) => (Termination::LineSearchFailure, Outcome::LineSearchFailure, 0, f64::NAN, x0.to_vec()),
    };
    TrialRecord {
        trial_index,
        algorithm,
        x0: x0.to_vec(),
        termination,
        outcome,
        iterations,
        f_final,
        rel_obj_error: case.relative_objective_error(f_final),
        x_final,
        wall_ms,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSummary {
    pub algorithm: Algorithm,
    pub trials: usize,
    pub successes: usize,
    pub failures: usize,
    pub failure_rate: f64,
    pub outcome_counts: BTreeMap<Outcome, usize>,
    /// Over successful trials; `None` when nothing succeeded.
    pub mean_iterations: Option<f64>,
    pub mean_objective: Option<f64>,
    pub objective_rel_error: Option<f64>,
    /// Per-variable means over successful trials; empty when nothing succeeded.
    pub mean_variables: Vec<f64>,
    pub variable_rel_errors: Vec<f64>,
    /// Entry `k - 1` is the fraction of trials that succeeded within `k` iterations.
    pub convergence_curve: Vec<f64>,
}

impl AlgorithmSummary {
    pub fn count(&self, outcome: Outcome) -> usize {
        self.outcome_counts.get(&outcome).copied().unwrap_or(0)
    }

    /// Fraction of all trials that succeeded within `k` iterations.
    pub fn converged_within(&self, k: usize) -> f64 {
        if k == 0 {
            return 0.0;
        }
        self.convergence_curve.get(k - 1).or(self.convergence_curve.last()).copied().unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub benchmark: BenchmarkName,
    pub guess_quality: GuessQuality,
    pub trials_per_cell: usize,
    pub rng_seed: u64,
    pub max_iter: usize,
    pub sampling: String,
    pub iteration_convention: String,
    pub variable_names: Vec<String>,
    pub optimum_objective: f64,
    pub optimum_x: Vec<f64>,
    pub algorithms: Vec<AlgorithmSummary>,
}

impl ExperimentSummary {
    pub fn algorithm(&self, algorithm: Algorithm) -> Option<&AlgorithmSummary> {
        self.algorithms.iter().find(|a| a.algorithm == algorithm)
    }

    pub fn to_json(&self) -> Result<String, HarnessError> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub summary: ExperimentSummary,
    /// Grouped by algorithm in config order, then by trial index.
    pub records: Vec<TrialRecord>,
}

pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    run_experiment_on(&config.benchmark.case(), config)
}

/// Like [`run_experiment`] with an explicitly constructed case, e.g. one with
/// constants loaded from a problem description.
pub fn run_experiment_on(case: &BenchmarkCase, config: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    config.validate()?;
    if case.name != config.benchmark {
        return Err(HarnessError::BenchmarkMismatch { config: config.benchmark, case: case.name });
    }
    let guesses = initial_guesses(case, config);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.worker_count).build()?;
    let mut records = Vec::with_capacity(guesses.len() * config.algorithms.len());
    for &algorithm in &config.algorithms {
        let options = config.options_for(case, algorithm);
        let cell: Vec<TrialRecord> = pool.install(|| {
            guesses.par_iter().enumerate().map(|(i, x0)| run_trial(case, algorithm, i, x0, &options)).collect()
        });
        records.extend(cell);
    }
    let summary = summarize(case, config, &records);
    Ok(ExperimentOutput { summary, records })
}

/// Aggregates records in the order given. Wall times are ignored so the
/// summary is a pure function of the seed.
pub fn summarize(case: &BenchmarkCase, config: &ExperimentConfig, records: &[TrialRecord]) -> ExperimentSummary {
    let n = case.problem.n_vars();
    let x_star = &case.known_optimum.x_star;
    let f_star = case.known_optimum.objective_value;
    let algorithms = config
        .algorithms
        .iter()
        .map(|&algorithm| {
            let cell: Vec<&TrialRecord> = records.iter().filter(|r| r.algorithm == algorithm).collect();
            let ok: Vec<&TrialRecord> = cell.iter().copied().filter(|r| r.outcome == Outcome::Success).collect();
            let mut outcome_counts = BTreeMap::new();
            for r in &cell {
                *outcome_counts.entry(r.outcome).or_insert(0) += 1;
            }
            let trials = cell.len();
            let successes = ok.len();
            let mean = |f: &dyn Fn(&TrialRecord) -> f64| -> Option<f64> {
                (successes > 0).then(|| ok.iter().map(|r| f(r)).sum::<f64>() / successes as f64)
            };
            let mean_objective = mean(&|r| r.f_final);
            let mean_variables: Vec<f64> =
                if successes > 0 { (0..n).map(|i| mean(&|r| r.x_final[i]).unwrap_or(f64::NAN)).collect() } else { vec![] };
            let variable_rel_errors = mean_variables.iter().zip(x_star).map(|(m, s)| (m - s) / s).collect();

            let mut hist = vec![0usize; config.max_iter + 1];
            for r in &ok {
                hist[r.iterations.min(config.max_iter)] += 1;
            }
            let mut running = hist[0];
            let convergence_curve = (1..=config.max_iter)
                .map(|k| {
                    running += hist[k];
                    running as f64 / trials.max(1) as f64
                })
                .collect();

            AlgorithmSummary {
                algorithm,
                trials,
                successes,
                failures: trials - successes,
                failure_rate: (trials - successes) as f64 / trials.max(1) as f64,
                outcome_counts,
                mean_iterations: mean(&|r| r.iterations as f64),
                objective_rel_error: mean_objective.map(|m| (m - f_star) / f_star),
                mean_objective,
                mean_variables,
                variable_rel_errors,
                convergence_curve,
            }
        })
        .collect();

    ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        benchmark: case.name,
        guess_quality: config.guess_quality,
        trials_per_cell: config.trials_per_cell,
        rng_seed: config.rng_seed,
        max_iter: config.max_iter,
        sampling: SAMPLING.to_string(),
        iteration_convention: ITERATION_CONVENTION.to_string(),
        variable_names: case.problem.variable_names().to_vec(),
        optimum_objective: f_star,
        optimum_x: x_star.clone(),
        algorithms,
    }
}

const FIXED_COLUMNS: [&str; 9] =
    ["benchmark", "algorithm", "trial", "seed", "outcome", "iterations", "f_final", "rel_obj_error", "wall_ms"];

/// Writes one row per trial: the fixed columns, then `termination`, then
/// `x0_<name>` and `x_<name>` for every variable.
pub fn write_trials_csv<W: Write>(
    out: W,
    case: &BenchmarkCase,
    config: &ExperimentConfig,
    records: &[TrialRecord],
) -> Result<(), HarnessError> {
    let names = case.problem.variable_names();
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.push("termination".into());
    header.extend(names.iter().map(|n| format!("x0_{n}")));
    header.extend(names.iter().map(|n| format!("x_{n}")));
    w.write_record(&header)?;
    for r in records {
        let mut row = vec![
            case.name.to_string(),
            r.algorithm.to_string(),
            r.trial_index.to_string(),
            config.rng_seed.to_string(),
            r.outcome.to_string(),
            r.iterations.to_string(),
            r.f_final.to_string(),
            r.rel_obj_error.to_string(),
            format!("{:.3}", r.wall_ms),
            r.termination.to_string(),
        ];
        row.extend(r.x0.iter().map(f64::to_string));
        row.extend(r.x_final.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Parses records written by [`write_trials_csv`].
pub fn read_trials_csv<R: Read>(input: R, n_vars: usize) -> Result<Vec<TrialRecord>, HarnessError> {
    let mut rd = csv::Reader::from_reader(input);
    let bad = |what: &str| HarnessError::MalformedCsv(what.to_string());
    let mut records = Vec::new();
    for row in rd.records() {
        let row = row?;
        if row.len() != FIXED_COLUMNS.len() + 1 + 2 * n_vars {
            return Err(bad("wrong column count"));
        }
        let num = |i: usize| row[i].parse::<f64>().map_err(|_| bad(&format!("column {i}: {:?}", &row[i])));
        let vars = |from: usize| (from..from + n_vars).map(num).collect::<Result<Vec<_>, _>>();
        let termination = match &row[9] {
            "GradLagrangian" => Termination::GradLagrangian,
            "SmallStep" => Termination::SmallStep,
            "MaxIter" => Termination::MaxIter,
            "LineSearchFailure" => Termination::LineSearchFailure,
            "TransformFailure" => Termination::TransformFailure,
            other => return Err(bad(other)),
        };
        records.push(TrialRecord {
            algorithm: row[1].parse().map_err(|e: String| bad(&e))?,
            trial_index: row[2].parse().map_err(|_| bad("trial"))?,
            outcome: row[4].parse().map_err(|e: String| bad(&e))?,
            iterations: row[5].parse().map_err(|_| bad("iterations"))?,
            f_final: num(6)?,
            rel_obj_error: num(7)?,
            wall_ms: num(8)?,
            termination,
            x0: vars(10)?,
            x_final: vars(10 + n_vars)?,
        });
    }
    Ok(records)
}

/// Writes `k` and one column per algorithm with the convergence probability.
pub fn write_curves_csv<W: Write>(out: W, summary: &ExperimentSummary) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["k".to_string()];
    header.extend(summary.algorithms.iter().map(|a| a.algorithm.to_string()));
    w.write_record(&header)?;
    for k in 1..=summary.max_iter {
        let mut row = vec![k.to_string()];
        row.extend(summary.algorithms.iter().map(|a| a.converged_within(k).to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
