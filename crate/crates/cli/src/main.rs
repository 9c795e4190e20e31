//! `execaware`: trace programs, build datasets, benchmark candidates and
//! compare evaluation reports.
//!
//! Settings are layered: built-in defaults, then the TOML file given with
//! `--config`, then `EXECAWARE_*` environment variables, then flags.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use execaware::aspects::AspectKind;
use execaware::config::{Backend, PipelineConfig};
use execaware::dataset::Strategy;
use execaware::eval::render_report;
use execaware::pipeline;
use execaware::stats::render_comparisons;

#[derive(Parser)]
#[command(name = "execaware", version, about = "Execution-aware dataset and benchmark pipeline")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, env = "EXECAWARE_CONFIG")]
    config: Option<PathBuf>,

    /// Worker threads for tracing and benchmarking [default: logical CPUs].
    #[arg(long, global = true, env = "EXECAWARE_JOBS")]
    jobs: Option<usize>,

    #[command(flatten)]
    overrides: Overrides,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Overrides {
    #[arg(long, global = true, env = "EXECAWARE_SEED")]
    seed: Option<u64>,
    #[arg(long, global = true, env = "EXECAWARE_CORPUS")]
    corpus: Option<PathBuf>,
    #[arg(long, global = true, env = "EXECAWARE_TRACES")]
    traces: Option<PathBuf>,
    #[arg(long, global = true, env = "EXECAWARE_DATASETS")]
    datasets: Option<PathBuf>,
    #[arg(long, global = true, env = "EXECAWARE_REPORTS")]
    reports: Option<PathBuf>,

    /// Per-trace time cap in seconds.
    #[arg(long, global = true, env = "EXECAWARE_TIME_CAP")]
    time_cap: Option<f64>,
    /// `gdb` or an external adapter command.
    #[arg(long, global = true, env = "EXECAWARE_ADAPTER")]
    adapter: Option<String>,

    #[arg(long, global = true, env = "EXECAWARE_TOKEN_LIMIT")]
    token_limit: Option<usize>,
    #[arg(long, global = true, env = "EXECAWARE_MASK_RATE")]
    mask_rate: Option<f64>,
    #[arg(long, global = true, env = "EXECAWARE_PER_PROBLEM_CAP")]
    per_problem_cap: Option<usize>,
    /// Formatter run after comment removal; empty disables it.
    #[arg(long, global = true, env = "EXECAWARE_FORMATTER")]
    formatter: Option<String>,
    /// `punct` or a token-count command.
    #[arg(long, global = true, env = "EXECAWARE_TOKENIZER")]
    tokenizer: Option<String>,
    /// Quantization scheme file.
    #[arg(long, global = true, env = "EXECAWARE_SCHEME")]
    scheme: Option<String>,

    #[arg(long, global = true, env = "EXECAWARE_COMPILER")]
    compiler: Option<String>,
    #[arg(long, global = true, env = "EXECAWARE_COMPILE_FLAGS", allow_hyphen_values = true)]
    compile_flags: Option<String>,
    /// `wallclock` or `simulator`.
    #[arg(long, global = true, env = "EXECAWARE_BACKEND")]
    backend: Option<Backend>,
    #[arg(long, global = true, env = "EXECAWARE_SIMULATOR_CMD")]
    simulator_cmd: Option<String>,
    #[arg(long, global = true, env = "EXECAWARE_REPS")]
    reps: Option<u32>,
    /// Per-case timeout in seconds.
    #[arg(long, global = true, env = "EXECAWARE_CASE_TIMEOUT")]
    case_timeout: Option<f64>,
    /// Benchmark pairs concurrently instead of one at a time.
    #[arg(long, global = true, env = "EXECAWARE_PARALLEL_TIMING")]
    parallel_timing: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the corpus under the debugger.
    Trace,
    /// Build the datasets of one strategy.
    Dataset {
        #[arg(long, value_parser = parse_strategy)]
        strategy: Strategy,
        /// One aspect (LE, LC, BC, VS); all four when omitted.
        #[arg(long, value_parser = parse_aspect)]
        aspect: Option<AspectKind>,
        /// Baseline only: keep pairs whose slow program has a complete trace.
        #[arg(long)]
        traced_only: bool,
    },
    /// Benchmark a candidates file.
    Eval {
        candidates: PathBuf,
        /// Report name; defaults to the candidates file stem.
        #[arg(long)]
        label: Option<String>,
    },
    /// Compare the speedups of two evaluation reports.
    Compare { treatment: PathBuf, baseline: PathBuf },
    /// Configuration commands.
    Config {
        #[command(subcommand)]
        action: ConfigAction,
    },
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the effective configuration.
    Show,
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn parse_aspect(s: &str) -> Result<AspectKind, String> {
    AspectKind::ALL
        .into_iter()
        .find(|a| a.as_str().eq_ignore_ascii_case(s))
        .ok_or_else(|| format!("unknown aspect `{s}` (expected LE, LC, BC or VS)"))
}

impl Overrides {
    fn apply(&self, cfg: &mut PipelineConfig) {
        fn set<T: Clone>(slot: &mut T, v: &Option<T>) {
            if let Some(v) = v {
                *slot = v.clone();
            }
        }
        set(&mut cfg.seed, &self.seed);
        set(&mut cfg.paths.corpus, &self.corpus);
        set(&mut cfg.paths.traces, &self.traces);
        set(&mut cfg.paths.datasets, &self.datasets);
        set(&mut cfg.paths.reports, &self.reports);
        set(&mut cfg.tracer.time_cap_s, &self.time_cap);
        set(&mut cfg.tracer.adapter_cmd, &self.adapter);
        set(&mut cfg.dataset.token_limit, &self.token_limit);
        set(&mut cfg.dataset.mask_rate, &self.mask_rate);
        set(&mut cfg.dataset.per_problem_cap, &self.per_problem_cap);
        set(&mut cfg.dataset.formatter_cmd, &self.formatter);
        set(&mut cfg.dataset.tokenizer_adapter, &self.tokenizer);
        set(&mut cfg.dataset.scheme_file, &self.scheme);
        set(&mut cfg.bench.compiler.compiler_cmd, &self.compiler);
        set(&mut cfg.bench.compiler.compile_flags, &self.compile_flags);
        set(&mut cfg.bench.backend, &self.backend);
        set(&mut cfg.bench.simulator_cmd, &self.simulator_cmd);
        set(&mut cfg.bench.reps, &self.reps);
        set(&mut cfg.bench.case_timeout_s, &self.case_timeout);
        if self.parallel_timing {
            cfg.bench.sequential_timing = false;
        }
    }
}

fn load_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut cfg = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    cli.overrides.apply(&mut cfg);
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<()> {
    let cfg = load_config(&cli)?;
    let jobs = cli
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    match cli.command {
        Command::Trace => {
            let s = pipeline::cmd_trace(&cfg, jobs)?;
            println!(
                "traced {} items: {} complete, {} timeout, {} crashed, {} failed",
                s.total, s.complete, s.timeout, s.crashed, s.failed
            );
            for item in s.items.iter().filter(|i| i.error.is_some()) {
                eprintln!("{}/{}: {}", item.program_id, item.case_id, item.error.as_deref().unwrap_or(""));
            }
        }
        Command::Dataset { strategy, aspect, traced_only } => {
            for s in pipeline::cmd_dataset(&cfg, strategy, aspect, traced_only, jobs)? {
                println!(
                    "{}: pretrain {} kept / {} dropped, finetune {} kept / {} dropped, {} skipped",
                    s.name,
                    s.pretrain.kept,
                    s.pretrain.dropped.len(),
                    s.finetune.kept,
                    s.finetune.dropped.len(),
                    s.skipped.len()
                );
            }
        }
        Command::Eval { candidates, label } => {
            let label = match label {
                Some(l) => l,
                None => candidates
                    .file_stem()
                    .and_then(|s| s.to_str())
                    .context("cannot derive a label from the candidates path; pass --label")?
                    .to_owned(),
            };
            let report = pipeline::cmd_eval(&cfg, &candidates, &label, jobs)?;
            print!("{}", render_report(&report));
            for f in &report.failures {
                eprintln!("{}: {}", f.id, f.error);
            }
        }
        Command::Compare { treatment, baseline } => {
            let c = pipeline::cmd_compare(&cfg, &treatment, &baseline)?;
            print!("{}", render_comparisons(std::slice::from_ref(&c)));
        }
        Command::Config { action: ConfigAction::Show } => {
            println!("# jobs = {jobs}");
            print!("{}", cfg.to_toml());
            let scheme = pipeline::load_scheme(&cfg)?;
            println!("\n# quantization scheme in effect");
            for line in toml::to_string(&scheme)?.lines() {
                println!("# {line}");
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
