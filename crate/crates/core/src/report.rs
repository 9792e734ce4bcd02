//! Result tables in the layout `| | Optimum | SQP | LSQP |`.
//!
//! Everything here is a function of an [`ExperimentSummary`], and the summary
//! is a function of the trial records, so a table can be rebuilt from the
//! trials CSV alone (see [`summary_from_csv`]).

use std::fmt::Write as _;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::benchmarks::BenchmarkCase;
use crate::harness::{read_trials_csv, summarize, AlgorithmSummary, ExperimentConfig, ExperimentSummary, HarnessError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Md,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "md" | "markdown" => Ok(Format::Md),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown format '{other}' (expected md, csv or json)")),
        }
    }
}

/// Compact number formatting: fixed two decimals in the readable range,
/// scientific otherwise.
pub fn fmt_value(v: f64) -> String {
    if !v.is_finite() {
        return "-".into();
    }
    let a = v.abs();
    if a == 0.0 {
        "0.00".into()
    } else if (0.1..1e5).contains(&a) {
        format!("{v:.2}")
    } else {
        format!("{v:.3e}")
    }
}

pub fn fmt_percent(rel: f64) -> String {
    if rel.is_finite() {
        format!("{:+.2}%", 100.0 * rel)
    } else {
        "-".into()
    }
}

fn with_rel(value: Option<f64>, rel: Option<f64>) -> String {
    match (value, rel) {
        (Some(v), Some(r)) => format!("{} ({})", fmt_value(v), fmt_percent(r)),
        _ => "-".into(),
    }
}

/// One table row: label, optimum column, one cell per algorithm.
pub type Row = (String, String, Vec<String>);

/// The table body: objective, each variable, mean iterations (relative to the
/// first algorithm), failures.
pub fn rows(summary: &ExperimentSummary) -> Vec<Row> {
    let algos = &summary.algorithms;
    let mut out = Vec::new();
    out.push((
        "Obj".to_string(),
        fmt_value(summary.optimum_objective),
        algos.iter().map(|a| with_rel(a.mean_objective, a.objective_rel_error)).collect(),
    ));
    for (i, name) in summary.variable_names.iter().enumerate() {
        let cell = |a: &AlgorithmSummary| with_rel(a.mean_variables.get(i).copied(), a.variable_rel_errors.get(i).copied());
        out.push((name.clone(), fmt_value(summary.optimum_x[i]), algos.iter().map(cell).collect()));
    }
    let base = algos.first().and_then(|a| a.mean_iterations);
    out.push((
        "Iterations".to_string(),
        "-".to_string(),
        algos
            .iter()
            .map(|a| match (a.mean_iterations, base) {
                (Some(m), Some(b)) => format!("{m:.2} ({})", fmt_percent(m / b - 1.0)),
                (Some(m), None) => format!("{m:.2}"),
                (None, _) => "-".into(),
            })
            .collect(),
    ));
    out.push((
        "Failures".to_string(),
        "-".to_string(),
        algos.iter().map(|a| format!("{} ({:.2}%)", a.failures, 100.0 * a.failure_rate)).collect(),
    ));
    out
}

fn header(summary: &ExperimentSummary) -> Vec<String> {
    let mut h = vec![String::new(), "Optimum".to_string()];
    h.extend(summary.algorithms.iter().map(|a| a.algorithm.to_string()));
    h
}

pub fn markdown_table(summary: &ExperimentSummary) -> String {
    let h = header(summary);
    let mut s = String::new();
    let _ = writeln!(s, "| {} |", h.join(" | "));
    let _ = writeln!(s, "|{}", "---|".repeat(h.len()));
    for (label, opt, cells) in rows(summary) {
        let _ = writeln!(s, "| {label} | {opt} | {} |", cells.join(" | "));
    }
    s
}

pub fn csv_table(summary: &ExperimentSummary) -> Result<String, HarnessError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut h = header(summary);
    h[0] = "quantity".into();
    w.write_record(&h)?;
    for (label, opt, cells) in rows(summary) {
        let mut rec = vec![label, opt];
        rec.extend(cells);
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| HarnessError::Csv(e.into_error().into()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn render(summary: &ExperimentSummary, format: Format) -> Result<String, HarnessError> {
    match format {
        Format::Md => Ok(markdown_table(summary)),
        Format::Csv => csv_table(summary),
        Format::Json => summary.to_json(),
    }
}

/// Rebuilds a summary from a trials CSV written by the harness.
pub fn summary_from_csv<R: Read>(
    case: &BenchmarkCase,
    config: &ExperimentConfig,
    input: R,
) -> Result<ExperimentSummary, HarnessError> {
    let records = read_trials_csv(input, case.problem.n_vars())?;
    Ok(summarize(case, config, &records))
}
