//! Benchmarking generated programs against their inputs: correctness,
//! speedup, optimization rate and the compile/execute/correct funnel.

pub mod run;

use std::fmt::Write as _;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::TestCase;

pub use run::{
    check_toolchain, compile, execute, parse_sim_seconds, Artifact, CompilerConfig, RunOutcome,
    RunStatus, Simulator, TimingBackend, WallClock,
};

/// Minimum speedup for a generated program to count as optimized.
pub const OPT_THRESHOLD: f64 = 1.1;
/// Speedup above which an optimization is non-negligible.
pub const NON_NEGLIGIBLE_THRESHOLD: f64 = 1.01;
pub const DEFAULT_CASE_TIMEOUT_SECS: f64 = 10.0;
pub const DEFAULT_REPS: u32 = 3;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("compilation failed:\n{0}")]
    CompileError(String),
    #[error("compiler `{0}` not found")]
    ToolchainMissing(String),
    #[error("timing backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("time vectors differ in length or are empty ({0} vs {1})")]
    MismatchedCases(usize, usize),
    #[error("non-positive or non-finite time {0}")]
    NonPositiveTime(f64),
    #[error("no records to aggregate")]
    EmptyInput,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Output equality up to line endings, trailing whitespace on each line and
/// trailing blank lines.
pub fn judge_output(actual: &str, expected: &str) -> bool {
    fn normalize(s: &str) -> Vec<&str> {
        let mut lines: Vec<&str> = s.split('\n').map(str::trim_end).collect();
        while lines.last().is_some_and(|l| l.is_empty()) {
            lines.pop();
        }
        lines
    }
    normalize(actual) == normalize(expected)
}

/// Mean over test cases of `input / generated` time, clamped below at 1.
/// An incorrect program scores exactly 1.
pub fn program_speedup(input_times: &[f64], gen_times: &[f64], correct: bool) -> Result<f64, EvalError> {
    if !correct {
        return Ok(1.0);
    }
    if input_times.is_empty() || input_times.len() != gen_times.len() {
        return Err(EvalError::MismatchedCases(input_times.len(), gen_times.len()));
    }
    if let Some(&bad) = input_times
        .iter()
        .chain(gen_times)
        .find(|t| !(t.is_finite() && **t > 0.0))
    {
        return Err(EvalError::NonPositiveTime(bad));
    }
    let mean = input_times
        .iter()
        .zip(gen_times)
        .map(|(i, g)| i / g)
        .sum::<f64>()
        / input_times.len() as f64;
    Ok(mean.max(1.0))
}

pub fn is_optimized(correct: bool, speedup: f64) -> bool {
    correct && speedup >= OPT_THRESHOLD
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseResult {
    pub case_id: String,
    pub input_status: Option<RunStatus>,
    pub generated_status: Option<RunStatus>,
    pub output_matches: bool,
}

/// Everything that depends on measured time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordTiming {
    pub speedup: f64,
    pub optimized: bool,
    pub input_times: Vec<f64>,
    pub generated_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub pair_id: String,
    pub input_program_id: String,
    pub generated_program_id: String,
    /// The input program compiled and passed every case; without this the
    /// speedup cannot be measured and is left at 1.
    pub input_ok: bool,
    pub compiled: bool,
    pub executed: bool,
    pub correct: bool,
    pub cases: Vec<CaseResult>,
    pub timing: RecordTiming,
}

impl EvalRecord {
    pub fn speedup(&self) -> f64 {
        self.timing.speedup
    }

    pub fn optimized(&self) -> bool {
        self.timing.optimized
    }

    /// Assembles a record from per-case runs. `input` is `None` when the
    /// input program failed to compile, `generated` likewise.
    pub fn from_runs(
        pair_id: impl Into<String>,
        input_program_id: impl Into<String>,
        generated_program_id: impl Into<String>,
        tests: &[TestCase],
        input: Option<&[RunOutcome]>,
        generated: Option<&[RunOutcome]>,
    ) -> Result<EvalRecord, EvalError> {
        let ok = |r: &RunOutcome| r.run_status == RunStatus::Ok;
        let passes = |runs: &[RunOutcome]| {
            runs.len() == tests.len()
                && runs
                    .iter()
                    .zip(tests)
                    .all(|(r, t)| ok(r) && judge_output(&r.stdout, &t.expected_stdout))
        };
        let input_ok = input.is_some_and(|r| !tests.is_empty() && passes(r));
        let compiled = generated.is_some();
        let executed = generated.is_some_and(|r| r.len() == tests.len() && r.iter().all(ok));
        let correct = generated.is_some_and(|r| !tests.is_empty() && passes(r));

        let times = |runs: Option<&[RunOutcome]>| -> Vec<f64> {
            runs.map(|r| r.iter().map(|o| o.time).collect()).unwrap_or_default()
        };
        let (input_times, generated_times) = (times(input), times(generated));
        let speedup = program_speedup(&input_times, &generated_times, correct && input_ok)?;

        let cases = tests
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let g = generated.and_then(|r| r.get(i));
                CaseResult {
                    case_id: t.case_id.clone(),
                    input_status: input.and_then(|r| r.get(i)).map(|o| o.run_status),
                    generated_status: g.map(|o| o.run_status),
                    output_matches: g.is_some_and(|o| ok(o) && judge_output(&o.stdout, &t.expected_stdout)),
                }
            })
            .collect();

        Ok(EvalRecord {
            pair_id: pair_id.into(),
            input_program_id: input_program_id.into(),
            generated_program_id: generated_program_id.into(),
            input_ok,
            compiled,
            executed,
            correct,
            cases,
            timing: RecordTiming {
                speedup,
                optimized: is_optimized(correct, speedup),
                input_times,
                generated_times,
            },
        })
    }
}

fn run_all(
    source: &str,
    tests: &[TestCase],
    compiler: &CompilerConfig,
    backend: &dyn TimingBackend,
    timeout: Duration,
) -> Result<Option<Vec<RunOutcome>>, EvalError> {
    let artifact = match compile(source, compiler) {
        Ok(a) => a,
        Err(EvalError::CompileError(diag)) => {
            log::debug!("compile error: {diag}");
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    tests
        .iter()
        .map(|t| execute(&artifact, t, backend, timeout))
        .collect::<Result<Vec<_>, _>>()
        .map(Some)
}

/// One slow/generated pair to benchmark.
#[derive(Debug, Clone)]
pub struct PairJob<'a> {
    pub pair_id: &'a str,
    pub input_program_id: &'a str,
    pub input_source: &'a str,
    pub generated_program_id: &'a str,
    pub generated_source: &'a str,
}

/// Compiles and runs both programs of a pair on every test case.
pub fn evaluate_pair(
    job: &PairJob<'_>,
    tests: &[TestCase],
    compiler: &CompilerConfig,
    backend: &dyn TimingBackend,
    case_timeout: Duration,
) -> Result<EvalRecord, EvalError> {
    check_toolchain(compiler)?;
    backend.check_available()?;
    let input = run_all(job.input_source, tests, compiler, backend, case_timeout)?;
    let generated = run_all(job.generated_source, tests, compiler, backend, case_timeout)?;
    let record = EvalRecord::from_runs(
        job.pair_id,
        job.input_program_id,
        job.generated_program_id,
        tests,
        input.as_deref(),
        generated.as_deref(),
    )?;
    if !record.input_ok {
        log::warn!("{}: input program does not pass its own tests", job.pair_id);
    }
    Ok(record)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedupMetrics {
    pub mean_speedup: f64,
    pub opt_pct: f64,
    pub mean_speedup_correct: Option<f64>,
    pub n_optimized_gt1pct: usize,
    pub mean_speedup_optimized: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n: usize,
    pub compiled_pct: f64,
    pub executed_pct: f64,
    pub correct_pct: f64,
    pub n_correct: usize,
    pub timing: SpeedupMetrics,
}

impl MetricsReport {
    pub fn mean_speedup(&self) -> f64 {
        self.timing.mean_speedup
    }

    pub fn opt_pct(&self) -> f64 {
        self.timing.opt_pct
    }
}

fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

pub fn aggregate(records: &[EvalRecord]) -> Result<MetricsReport, EvalError> {
    if records.is_empty() {
        return Err(EvalError::EmptyInput);
    }
    let n = records.len();
    let pct = |k: usize| 100.0 * k as f64 / n as f64;
    let count = |f: &dyn Fn(&EvalRecord) -> bool| records.iter().filter(|r| f(r)).count();
    let speedups_where = |f: &dyn Fn(&EvalRecord) -> bool| -> Vec<f64> {
        records.iter().filter(|r| f(r)).map(|r| r.speedup()).collect()
    };
    let all: Vec<f64> = records.iter().map(|r| r.speedup()).collect();
    let correct = speedups_where(&|r| r.correct);
    let non_negligible = speedups_where(&|r| r.correct && r.speedup() > NON_NEGLIGIBLE_THRESHOLD);
    Ok(MetricsReport {
        n,
        compiled_pct: pct(count(&|r| r.compiled)),
        executed_pct: pct(count(&|r| r.executed)),
        correct_pct: pct(correct.len()),
        n_correct: correct.len(),
        timing: SpeedupMetrics {
            mean_speedup: mean(&all).expect("non-empty"),
            opt_pct: pct(count(&|r| is_optimized(r.correct, r.speedup()))),
            mean_speedup_correct: mean(&correct),
            n_optimized_gt1pct: non_negligible.len(),
            mean_speedup_optimized: mean(&non_negligible),
        },
    })
}

/// Machine-readable evaluation output. Time-dependent values sit under the
/// `timing` keys of the metrics and of each record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub label: String,
    pub backend: String,
    pub metrics: MetricsReport,
    pub records: Vec<EvalRecord>,
    /// Items that could not be benchmarked at all; not part of the metrics.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub failures: Vec<ItemFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemFailure {
    pub id: String,
    pub error: String,
}

impl EvalReport {
    pub fn new(label: impl Into<String>, backend: impl Into<String>, mut records: Vec<EvalRecord>) -> Result<Self, EvalError> {
        records.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
        Ok(EvalReport {
            label: label.into(),
            backend: backend.into(),
            metrics: aggregate(&records)?,
            records,
            failures: Vec::new(),
        })
    }
}

fn opt_fmt(x: Option<f64>) -> String {
    x.map_or_else(|| "-".to_owned(), |v| format!("{v:.4}"))
}

/// Text tables: the overall metrics, the funnel and the conditional
/// speedups.
pub fn render_report(report: &EvalReport) -> String {
    let m = &report.metrics;
    let t = &m.timing;
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>6} {:>10} {:>10} {:>10} {:>12} {:>8}", "model", "n", "compiled%", "executed%", "correct%", "mean_speedup", "%opt");
    let _ = writeln!(
        s,
        "{:<12} {:>6} {:>10.2} {:>10.2} {:>10.2} {:>12.4} {:>8.2}",
        report.label, m.n, m.compiled_pct, m.executed_pct, m.correct_pct, t.mean_speedup, t.opt_pct
    );
    let _ = writeln!(s);
    let _ = writeln!(s, "{:<12} {:>10} {:>16} {:>14} {:>18}", "model", "n_correct", "speedup_correct", "n_opt(>1%)", "speedup_opt(>1%)");
    let _ = writeln!(
        s,
        "{:<12} {:>10} {:>16} {:>14} {:>18}",
        report.label,
        m.n_correct,
        opt_fmt(t.mean_speedup_correct),
        t.n_optimized_gt1pct,
        opt_fmt(t.mean_speedup_optimized)
    );
    s
}
