//! Command-line frontend: `bench`, `solve`, `scan` and `list`.
//!
//! Exit codes: 0 on success, 1 on usage errors (bad flags, unknown problem,
//! malformed `--x0`), 2 on runtime failures (an experiment aborts, a solve
//! does not converge, artifacts cannot be written).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::benchmarks::{BenchmarkCase, BenchmarkError, BenchmarkName, ProblemDescription};
use crate::gp::{gp_compatibility_scan, DEFAULT_COMPATIBILITY_THRESHOLD};
use crate::harness::{
    default_workers, initial_guess, run_experiment_on, write_curves_csv, write_trials_csv, ExperimentConfig,
    GuessQuality, HarnessError,
};
use crate::report::{render, Format};
use crate::solver::Algorithm;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

/// Output directory when neither `--out` nor `LSQP_OUT_DIR` is given.
pub const DEFAULT_OUT_DIR: &str = "lsqp-out";

#[derive(Debug, Parser)]
#[command(name = "lsqp", version, about = "SQP and logspace SQP on engineering benchmarks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Monte Carlo comparison from random initial guesses.
    Bench(BenchArgs),
    /// One solve from an explicit or sampled starting point.
    Solve(SolveArgs),
    /// GP-compatibility scan of a benchmark's functions.
    Scan(ProblemArgs),
    /// Available benchmarks.
    List,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgoChoice {
    Sqp,
    Lsqp,
    Both,
}

impl AlgoChoice {
    fn algorithms(self) -> Vec<Algorithm> {
        match self {
            AlgoChoice::Sqp => vec![Algorithm::Sqp],
            AlgoChoice::Lsqp => vec![Algorithm::Lsqp],
            AlgoChoice::Both => Algorithm::BOTH.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GuessChoice {
    Good,
    Poor,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatChoice {
    Md,
    Csv,
    Json,
}

impl From<FormatChoice> for Format {
    fn from(f: FormatChoice) -> Self {
        match f {
            FormatChoice::Md => Format::Md,
            FormatChoice::Csv => Format::Csv,
            FormatChoice::Json => Format::Json,
        }
    }
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// boyd, rosenbrock, floudas or kirschen_ozturk (alias ko).
    #[arg(long)]
    pub problem: String,
    /// JSON problem description overriding constants or variable floors.
    #[arg(long)]
    pub description: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SolverFlags {
    #[arg(long, default_value_t = 500)]
    pub max_iter: usize,
    #[arg(long)]
    pub eps_gl: Option<f64>,
    #[arg(long)]
    pub eps_dx: Option<f64>,
    /// Cap line-search steps so every function stays positive.
    #[arg(long)]
    pub enforce_positivity: bool,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = AlgoChoice::Both)]
    pub algo: AlgoChoice,
    #[arg(long, value_enum, default_value_t = GuessChoice::Good)]
    pub guess: GuessChoice,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = FormatChoice::Md)]
    pub format: FormatChoice,
    #[arg(long, env = "LSQP_OUT_DIR", default_value = DEFAULT_OUT_DIR)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SolveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    #[arg(long, value_enum, default_value_t = AlgoChoice::Lsqp)]
    pub algo: AlgoChoice,
    /// Comma-separated starting point; a good-quality random guess from
    /// `--seed` when omitted.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    #[command(flatten)]
    pub solver: SolverFlags,
}

/// Parses `args` (program name first) and runs the command, writing to `out`
/// and `err`. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { write!(err, "{text}") } else { write!(out, "{text}") };
            return code;
        }
    };
    let result = match cli.command {
        Command::Bench(a) => bench(&a, out),
        Command::Solve(a) => solve(&a, out),
        Command::Scan(a) => scan(&a, out),
        Command::List => list(out),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message);
            e.code
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: EXIT_RUNTIME, message: message.into() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::runtime(e.to_string())
    }
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        Self::runtime(e.to_string())
    }
}

fn load_case(args: &ProblemArgs) -> Result<BenchmarkCase, CliError> {
    let name: BenchmarkName = args.problem.parse().map_err(|e: BenchmarkError| CliError::usage(e.to_string()))?;
    match &args.description {
        None => Ok(name.case()),
        Some(path) => {
            let desc = ProblemDescription::load(path).map_err(|e| CliError::usage(e.to_string()))?;
            if let Some(b) = desc.benchmark {
                if b != name {
                    return Err(CliError::usage(format!("description is for {b}, not {name}")));
                }
            }
            desc.build(name).map_err(|e| CliError::usage(e.to_string()))
        }
    }
}

fn config_for(case: &BenchmarkCase, a: &BenchArgs, quality: GuessQuality) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(case.name, quality);
    c.algorithms = a.algo.algorithms();
    c.trials_per_cell = a.trials;
    c.rng_seed = a.solver.seed;
    c.max_iter = a.solver.max_iter;
    c.worker_count = a.workers.unwrap_or_else(default_workers);
    c.eps_grad_lagrangian = a.solver.eps_gl;
    c.eps_step = a.solver.eps_dx;
    c.enforce_positivity = Some(a.solver.enforce_positivity);
    c
}

fn print_config(out: &mut dyn Write, case: &BenchmarkCase, c: &ExperimentConfig, out_dir: &Path) -> std::io::Result<()> {
    let algos: Vec<String> = c.algorithms.iter().map(|a| a.to_string()).collect();
    let opts = c.options_for(case, c.algorithms[0]);
    writeln!(out, "# benchmark: {}", c.benchmark)?;
    writeln!(out, "# guess: {} (±{:.0}%)", c.guess_quality, 100.0 * c.guess_quality.delta())?;
    writeln!(out, "# algorithms: {}", algos.join(", "))?;
    writeln!(out, "# trials: {}", c.trials_per_cell)?;
    writeln!(out, "# seed: {}", c.rng_seed)?;
    writeln!(out, "# max_iter: {}", c.max_iter)?;
    writeln!(out, "# eps_gl: {:e}", opts.eps_grad_lagrangian)?;
    writeln!(out, "# eps_dx: {:e}", opts.eps_step)?;
    writeln!(out, "# enforce_positivity: {}", opts.enforce_positivity_in_linesearch)?;
    writeln!(out, "# workers: {}", c.worker_count)?;
    writeln!(out, "# out: {}", out_dir.display())
}

pub fn artifact_stem(c: &ExperimentConfig) -> String {
    format!("{}_{}", c.benchmark, c.guess_quality)
}

fn bench(a: &BenchArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let case = load_case(&a.problem)?;
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    if a.workers == Some(0) {
        return Err(CliError::usage("--workers must be at least 1"));
    }
    let qualities = match a.guess {
        GuessChoice::Good => vec![GuessQuality::Good],
        GuessChoice::Poor => vec![GuessQuality::Poor],
        GuessChoice::Both => vec![GuessQuality::Good, GuessQuality::Poor],
    };
    std::fs::create_dir_all(&a.out)?;
    for quality in qualities {
        let config = config_for(&case, a, quality);
        print_config(out, &case, &config, &a.out)?;
        let result = run_experiment_on(&case, &config)?;
        let stem = artifact_stem(&config);
        write_trials_csv(
            BufWriter::new(File::create(a.out.join(format!("{stem}_trials.csv")))?),
            &case,
            &config,
            &result.records,
        )?;
        std::fs::write(a.out.join(format!("{stem}_summary.json")), result.summary.to_json()?)?;
        write_curves_csv(BufWriter::new(File::create(a.out.join(format!("{stem}_curves.csv")))?), &result.summary)?;
        writeln!(out)?;
        write!(out, "{}", render(&result.summary, a.format.into())?)?;
        writeln!(out)?;
    }
    Ok(())
}

fn solve(a: &SolveArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let case = load_case(&a.problem)?;
    let algorithms = a.algo.algorithms();
    let n = case.problem.n_vars();
    let x0 = match &a.x0 {
        Some(x) if x.len() != n => {
            return Err(CliError::usage(format!("--x0 has {} values, {} expects {n}", x.len(), case.name)))
        }
        Some(x) => x.clone(),
        None => {
            let mut c = ExperimentConfig::new(case.name, GuessQuality::Good);
            c.rng_seed = a.solver.seed;
            initial_guess(&case, &c, 0)
        }
    };
    let lb = case.problem.lower_bounds();
    if let Some(i) = (0..n).find(|&i| !(x0[i] >= lb[i])) {
        return Err(CliError::usage(format!(
            "--x0: {} = {} is below its floor {}",
            case.problem.variable_names()[i],
            x0[i],
            lb[i]
        )));
    }

    let names = case.problem.variable_names();
    writeln!(out, "# benchmark: {}", case.name)?;
    writeln!(out, "# x0: {}", join(&x0))?;
    let mut failed = Vec::new();
    for algorithm in algorithms {
        let mut opts = case.default_options(algorithm).clone();
        opts.max_iter = a.solver.max_iter;
        if let Some(v) = a.solver.eps_gl {
            opts.eps_grad_lagrangian = v;
        }
        if let Some(v) = a.solver.eps_dx {
            opts.eps_step = v;
        }
        opts.enforce_positivity_in_linesearch = a.solver.enforce_positivity;
        writeln!(out, "# algorithm: {algorithm}")?;
        writeln!(out, "# max_iter: {}", opts.max_iter)?;
        writeln!(out, "# eps_gl: {:e}", opts.eps_grad_lagrangian)?;
        writeln!(out, "# eps_dx: {:e}", opts.eps_step)?;
        writeln!(out, "# enforce_positivity: {}", opts.enforce_positivity_in_linesearch)?;

        let r = algorithm.solve(&case.problem, &x0, &opts).map_err(|e| CliError::runtime(e.to_string()))?;
        writeln!(out, "{:>4}  {:>14}  {:>10}  {:>10}  {:>10}", "k", "f", "alpha", "step", "violation")?;
        for (k, it) in r.trace.iter().enumerate() {
            writeln!(
                out,
                "{:>4}  {:>14.8e}  {:>10.3e}  {:>10.3e}  {:>10.3e}",
                k,
                it.f,
                it.alpha,
                it.step_norm,
                it.constraint_violation
            )?;
        }
        writeln!(out, "termination: {} after {} iterations", r.termination, r.iterations)?;
        if let Some(report) = &r.transform_failure {
            writeln!(out, "nonpositive: {report}")?;
        }
        writeln!(out, "f = {}", r.f_final)?;
        for (name, v) in names.iter().zip(&r.x_final) {
            writeln!(out, "{name} = {v}")?;
        }
        if !r.termination.is_converged() {
            failed.push(format!("{algorithm}: {}", r.termination));
        }
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::runtime(failed.join("; ")))
    }
}

fn scan(a: &ProblemArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let case = load_case(a)?;
    let r = gp_compatibility_scan(&case.structure, DEFAULT_COMPATIBILITY_THRESHOLD);
    let c = &r.constraints;
    writeln!(out, "problem: {}", case.name)?;
    match r.objective {
        Some(class) => writeln!(out, "objective: {class:?}")?,
        None => writeln!(out, "objective: unclassified")?,
    }
    writeln!(
        out,
        "constraints: {} monomial, {} posynomial, {} signomial, {} opaque",
        c.monomial, c.posynomial, c.signomial, c.opaque
    )?;
    writeln!(
        out,
        "gp-compatible: {} of {} ({:.0}%, threshold {:.0}%)",
        r.gp_compatible,
        r.total,
        100.0 * r.fraction,
        100.0 * r.threshold
    )?;
    writeln!(out, "recommend lsqp: {}", r.recommend_lsqp)?;
    Ok(())
}

fn list(out: &mut dyn Write) -> Result<(), CliError> {
    writeln!(out, "{:<16} {:>5} {:>5} {:>4}  {:>12}", "name", "vars", "ineq", "eq", "f*")?;
    for name in BenchmarkName::ALL {
        let case = name.case();
        let p = &case.problem;
        writeln!(
            out,
            "{:<16} {:>5} {:>5} {:>4}  {:>12.6e}",
            name.as_str(),
            p.n_vars(),
            p.n_ineq(),
            p.n_eq(),
            case.known_optimum.objective_value
        )?;
    }
    Ok(())
}

fn join(x: &[f64]) -> String {
    x.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}
