//! End-to-end stages over an on-disk corpus: tracing, dataset construction,
//! benchmarking candidates and comparing reports.
//!
//! ```text
//! <traces>/<program_id>/<case_id>.trace
//! <traces>/summary.json
//! <datasets>/<STRATEGY>[-<ASPECT>]/{pretrain,finetune}.jsonl, report.json
//! <reports>/<label>.json, <label>.txt
//! <reports>/compare_<treatment>_vs_<baseline>.{json,txt}
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::{AspectError, AspectKind, LineAspects};
use crate::config::{Backend, ConfigError, PipelineConfig};
use crate::corpus::{Corpus, CorpusError};
use crate::dataset::{
    annotate_slow_code, build_exec_pretrain, build_mlm, build_optimize, cap_per_problem,
    check_split_hygiene, counter_from_setting, filter_by_token_limit, read_jsonl,
    select_trace_for_s3, within_limit, write_jsonl, Candidate, DatasetError, DatasetInstance,
    DropReport, Formatter, HygieneReport, Strategy, TokenCounter,
};
use crate::dataset::select::Dropped;
use crate::eval::{
    check_toolchain, evaluate_pair, render_report, EvalError, EvalReport, ItemFailure, PairJob,
    Simulator, TimingBackend, WallClock,
};
use crate::quantize::{QuantizationScheme, QuantizeError};
use crate::stats::{compare, render_comparisons, ComparisonReport, StatsError};
use crate::trace::{
    collect_trace, parse_trace_for, serialize_trace, ExecutionTrace, SourceProgram, TraceError,
    TraceStatus,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error("debugger adapter unavailable: {0}")]
    AdapterUnavailable(String),
    #[error("no complete traces for {0}; run `trace` first")]
    MissingTraces(String),
    #[error("split hygiene violated: {0}")]
    HygieneViolation(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Quantize(#[from] QuantizeError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Aspect(#[from] AspectError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
}

fn io_at(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_owned(),
        source,
    }
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), PipelineError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io_at(dir))?;
    }
    std::fs::write(path, contents).map_err(io_at(path))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(path, text)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = std::fs::read_to_string(path).map_err(io_at(path))?;
    serde_json::from_str(&text).map_err(|source| PipelineError::Json {
        path: path.to_owned(),
        source,
    })
}

fn thread_pool(jobs: usize) -> rayon::ThreadPool {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("thread pool")
}

fn formatter(cfg: &PipelineConfig) -> Result<Option<Formatter>, PipelineError> {
    if cfg.dataset.formatter_cmd.trim().is_empty() {
        return Ok(None);
    }
    let f = Formatter::new(cfg.dataset.formatter_cmd.clone());
    f.check_available()?;
    Ok(Some(f))
}

/// Loads the corpus exactly as every stage sees it, so that trace line
/// numbers and dataset sources agree.
pub fn load_corpus(cfg: &PipelineConfig) -> Result<Corpus, PipelineError> {
    Ok(Corpus::load(&cfg.paths.corpus, formatter(cfg)?.as_ref())?)
}

pub fn load_scheme(cfg: &PipelineConfig) -> Result<QuantizationScheme, PipelineError> {
    if cfg.dataset.scheme_file.trim().is_empty() {
        Ok(QuantizationScheme::default())
    } else {
        Ok(QuantizationScheme::load(Path::new(&cfg.dataset.scheme_file))?)
    }
}

// ---------------------------------------------------------------- trace

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceItem {
    pub program_id: String,
    pub case_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<TraceStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub adapter: String,
    pub total: usize,
    pub complete: usize,
    pub timeout: usize,
    pub crashed: usize,
    pub failed: usize,
    pub items: Vec<TraceItem>,
}

impl TraceSummary {
    fn from_items(adapter: String, items: Vec<TraceItem>) -> Self {
        let count = |s: TraceStatus| items.iter().filter(|i| i.status == Some(s)).count();
        TraceSummary {
            adapter,
            total: items.len(),
            complete: count(TraceStatus::Complete),
            timeout: count(TraceStatus::Timeout),
            crashed: count(TraceStatus::Crashed),
            failed: items.iter().filter(|i| i.error.is_some()).count(),
            items,
        }
    }
}

pub fn trace_path(traces_dir: &Path, program_id: &str, case_id: &str) -> PathBuf {
    traces_dir.join(program_id).join(format!("{case_id}.trace"))
}

/// The (program, case) pairs to trace: the pre-training pool capped per
/// problem, plus every case of every slow program.
pub fn trace_plan(corpus: &Corpus, cap: usize, seed: u64) -> Vec<(String, String)> {
    let mut groups: BTreeMap<String, Vec<(String, String)>> = BTreeMap::new();
    for (problem, programs) in corpus.pretrain_pool() {
        let tests = &corpus.problems[&problem].tests;
        let items = programs
            .iter()
            .flat_map(|p| tests.iter().map(|t| (p.program_id.clone(), t.case_id.clone())))
            .collect();
        groups.insert(problem, items);
    }
    let mut plan: BTreeSet<(String, String)> =
        cap_per_problem(&groups, cap, seed).into_values().flatten().collect();
    for slow in corpus.slow_programs() {
        for t in corpus.tests_for(slow) {
            plan.insert((slow.to_owned(), t.case_id.clone()));
        }
    }
    plan.into_iter().collect()
}

/// Traces every planned pair and writes one file per trace plus
/// `summary.json`. Per-item failures are recorded in the summary; an
/// unavailable adapter fails every item and the stage as a whole.
pub fn cmd_trace(cfg: &PipelineConfig, jobs: usize) -> Result<TraceSummary, PipelineError> {
    let corpus = load_corpus(cfg)?;
    let plan = trace_plan(&corpus, cfg.dataset.per_problem_cap, cfg.seed);
    let adapter = cfg.tracer.adapter();
    let out = &cfg.paths.traces;
    std::fs::create_dir_all(out).map_err(io_at(out))?;

    if let Err(e) = adapter.check_available() {
        let items = plan
            .into_iter()
            .map(|(program_id, case_id)| TraceItem {
                program_id,
                case_id,
                status: None,
                error: Some(e.to_string()),
            })
            .collect();
        let summary = TraceSummary::from_items(adapter.name().to_owned(), items);
        write_json(&out.join("summary.json"), &summary)?;
        return Err(PipelineError::AdapterUnavailable(e.to_string()));
    }

    let items: Vec<TraceItem> = thread_pool(jobs).install(|| {
        plan.par_iter()
            .map(|(pid, cid)| {
                let program = corpus.program(pid).expect("planned program exists");
                let test = corpus
                    .tests_for(pid)
                    .iter()
                    .find(|t| &t.case_id == cid)
                    .expect("planned case exists");
                let result = collect_trace(program, test, &cfg.tracer, adapter.as_ref())
                    .and_then(|t| {
                        write_file(&trace_path(out, pid, cid), serialize_trace(&t))
                            .map_err(|e| TraceError::Adapter(e.to_string()))?;
                        Ok(t.status)
                    });
                match result {
                    Ok(status) => TraceItem {
                        program_id: pid.clone(),
                        case_id: cid.clone(),
                        status: Some(status),
                        error: None,
                    },
                    Err(e) => {
                        log::warn!("{pid}/{cid}: {e}");
                        TraceItem {
                            program_id: pid.clone(),
                            case_id: cid.clone(),
                            status: None,
                            error: Some(e.to_string()),
                        }
                    }
                }
            })
            .collect()
    });
    let summary = TraceSummary::from_items(adapter.name().to_owned(), items);
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}

/// Every stored trace of `program`, sorted by case id.
pub fn load_traces(traces_dir: &Path, program: &SourceProgram) -> Result<Vec<ExecutionTrace>, PipelineError> {
    let dir = traces_dir.join(&program.program_id);
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut paths: Vec<PathBuf> = std::fs::read_dir(&dir)
        .map_err(io_at(&dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "trace"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let doc = std::fs::read_to_string(p).map_err(io_at(p))?;
            Ok(parse_trace_for(&doc, program)?)
        })
        .collect()
}

// -------------------------------------------------------------- dataset

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skipped {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub strategy: Strategy,
    pub aspect: Option<AspectKind>,
    pub pretrain: DropReport,
    pub finetune: DropReport,
    pub skipped: Vec<Skipped>,
    pub hygiene: HygieneReport,
}

pub fn dataset_name(strategy: Strategy, aspect: Option<AspectKind>, traced_only: bool) -> String {
    match aspect {
        Some(a) if strategy != Strategy::BL => format!("{strategy}-{a}"),
        _ if strategy == Strategy::BL && traced_only => "BL-traced".into(),
        _ => strategy.to_string(),
    }
}

struct DatasetCtx<'a> {
    cfg: &'a PipelineConfig,
    corpus: &'a Corpus,
    scheme: QuantizationScheme,
    counter: Box<dyn TokenCounter>,
    traces: BTreeMap<String, Vec<ExecutionTrace>>,
    traced_only: bool,
}

impl DatasetCtx<'_> {
    fn complete_traces(&self, program_id: &str) -> Vec<&ExecutionTrace> {
        self.traces
            .get(program_id)
            .map(|ts| ts.iter().filter(|t| t.is_complete()).collect())
            .unwrap_or_default()
    }

    fn optimize_set(
        &self,
        strategy: Strategy,
        aspect: Option<AspectKind>,
        skipped: &mut Vec<Skipped>,
    ) -> Result<Vec<DatasetInstance>, PipelineError> {
        let mut out = Vec::new();
        for pair in &self.corpus.pairs {
            let slow = self.corpus.program(&pair.slow).expect("pair member exists");
            let fast = self.corpus.program(&pair.fast).expect("pair member exists");
            if strategy == Strategy::BL && self.traced_only && self.complete_traces(&pair.slow).is_empty() {
                skipped.push(Skipped {
                    id: crate::dataset::pair_id(&pair.slow, &pair.fast),
                    reason: "slow program has no complete trace".into(),
                });
                continue;
            }
            let slow_text = if strategy == Strategy::S3 {
                let kind = aspect.expect("S3 takes an aspect");
                let traces = self.traces.get(&pair.slow).map(Vec::as_slice).unwrap_or(&[]);
                match select_trace_for_s3(slow, traces, kind, self.cfg.seed) {
                    Ok(aspects) => annotate_slow_code(slow, &aspects, kind, &self.scheme)?,
                    Err(DatasetError::NoCompleteTraces) => {
                        skipped.push(Skipped {
                            id: crate::dataset::pair_id(&pair.slow, &pair.fast),
                            reason: "slow program has no complete trace".into(),
                        });
                        continue;
                    }
                    Err(e) => return Err(e.into()),
                }
            } else {
                slow.clone()
            };
            out.push(build_optimize(&slow_text, fast, strategy, aspect)?);
        }
        Ok(out)
    }

    /// Classify instances (and for S2 their paired mlm instances) over the
    /// complete traces of the pre-training pool.
    fn pretrain_set(
        &self,
        strategy: Strategy,
        kind: AspectKind,
    ) -> Result<Vec<(DatasetInstance, Option<DatasetInstance>)>, PipelineError> {
        let mut work: Vec<(&SourceProgram, &ExecutionTrace)> = Vec::new();
        for programs in self.corpus.pretrain_pool().values() {
            for p in programs {
                for t in self.complete_traces(&p.program_id) {
                    work.push((p, t));
                }
            }
        }
        work.par_iter()
            .filter_map(|(program, trace)| {
                let test = self
                    .corpus
                    .tests_for(&program.program_id)
                    .iter()
                    .find(|t| t.case_id == trace.case_id)?;
                Some((program, trace, test))
            })
            .map(|(program, trace, test)| {
                let aspects = LineAspects::derive(program, trace)?;
                let classify = build_exec_pretrain(program, test, &aspects, kind, &self.scheme, strategy)?;
                let mlm = if strategy == Strategy::S2 {
                    Some(build_mlm(
                        program,
                        Some(&test.case_id),
                        self.cfg.dataset.mask_rate,
                        self.cfg.seed,
                        strategy,
                    )?)
                } else {
                    None
                };
                Ok((classify, mlm))
            })
            .collect()
    }
}

/// Token-limit filtering for classify/mlm pairs: a pair survives only if
/// both members fit.
fn filter_pairs(
    pairs: Vec<(DatasetInstance, Option<DatasetInstance>)>,
    counter: &dyn TokenCounter,
    limit: usize,
) -> Result<(Vec<DatasetInstance>, DropReport), PipelineError> {
    let mut report = DropReport {
        token_counter: counter.name().to_owned(),
        limit,
        ..Default::default()
    };
    let mut kept = Vec::new();
    for (c, m) in pairs {
        let members: Vec<DatasetInstance> = std::iter::once(c).chain(m).collect();
        let mut fits = true;
        let mut drops = Vec::new();
        for inst in &members {
            let (ok, s, t) = within_limit(inst, counter, limit)?;
            if !ok {
                fits = false;
                drops.push(Dropped {
                    id: inst.id.clone(),
                    source_tokens: s,
                    target_tokens: t,
                });
            }
        }
        if fits {
            for mut inst in members {
                inst.meta.token_counter = counter.name().to_owned();
                kept.push(inst);
            }
        } else {
            report.dropped.extend(drops);
        }
    }
    report.kept = kept.len();
    Ok((kept, report))
}

/// Builds one dataset per requested aspect (all four when `aspect` is
/// `None`; the baseline has none) and writes it under the dataset
/// directory. Nothing is written for a dataset that fails split hygiene.
///
/// `traced_only` restricts the baseline to pairs whose slow program has a
/// complete trace, i.e. the pairs S3 can use.
pub fn cmd_dataset(
    cfg: &PipelineConfig,
    strategy: Strategy,
    aspect: Option<AspectKind>,
    traced_only: bool,
    jobs: usize,
) -> Result<Vec<DatasetSummary>, PipelineError> {
    let corpus = load_corpus(cfg)?;
    let mut ctx = DatasetCtx {
        cfg,
        corpus: &corpus,
        scheme: load_scheme(cfg)?,
        counter: counter_from_setting(&cfg.dataset.tokenizer_adapter)?,
        traces: BTreeMap::new(),
        traced_only,
    };

    let kinds: Vec<Option<AspectKind>> = match (strategy, aspect) {
        (Strategy::BL, _) => vec![None],
        (_, Some(a)) => vec![Some(a)],
        (_, None) => AspectKind::ALL.iter().copied().map(Some).collect(),
    };

    if strategy != Strategy::BL || traced_only {
        let needed: Vec<&SourceProgram> = if matches!(strategy, Strategy::S3 | Strategy::BL) {
            corpus.slow_programs().into_iter().filter_map(|p| corpus.program(p)).collect()
        } else {
            corpus.pretrain_pool().into_values().flatten().collect()
        };
        for p in needed {
            let ts = load_traces(&cfg.paths.traces, p)?;
            ctx.traces.insert(p.program_id.clone(), ts);
        }
        if ctx.traces.values().flatten().all(|t| !t.is_complete()) {
            let what = if matches!(strategy, Strategy::S3 | Strategy::BL) { "any slow program" } else { "any pre-training program" };
            return Err(PipelineError::MissingTraces(what.into()));
        }
    }

    let pool = thread_pool(jobs);
    let mut summaries = Vec::new();
    for kind in kinds {
        let name = dataset_name(strategy, kind, traced_only);
        let mut skipped = Vec::new();

        let mut finetune = ctx.optimize_set(strategy, kind, &mut skipped)?;
        finetune.sort_by(|a, b| a.id.cmp(&b.id));
        let (finetune, finetune_report) =
            filter_by_token_limit(finetune, ctx.counter.as_ref(), cfg.dataset.token_limit)?;

        let (pretrain, pretrain_report) = match (strategy, kind) {
            (Strategy::S1 | Strategy::S2, Some(k)) => {
                let mut pairs = pool.install(|| ctx.pretrain_set(strategy, k))?;
                pairs.sort_by(|a, b| a.0.id.cmp(&b.0.id));
                filter_pairs(pairs, ctx.counter.as_ref(), cfg.dataset.token_limit)?
            }
            _ => (
                Vec::new(),
                DropReport {
                    token_counter: ctx.counter.name().to_owned(),
                    limit: cfg.dataset.token_limit,
                    ..Default::default()
                },
            ),
        };

        let all: Vec<DatasetInstance> = pretrain.iter().chain(&finetune).cloned().collect();
        let hygiene = check_split_hygiene(&all);
        if !hygiene.passed() {
            return Err(PipelineError::HygieneViolation(
                serde_json::to_string(&hygiene.violations).expect("serializable"),
            ));
        }

        let dir = cfg.paths.datasets.join(&name);
        for (file, set) in [("pretrain.jsonl", &pretrain), ("finetune.jsonl", &finetune)] {
            let mut buf = Vec::new();
            write_jsonl(&mut buf, set).map_err(io_at(&dir))?;
            write_file(&dir.join(file), buf)?;
        }
        let summary = DatasetSummary {
            name,
            strategy,
            aspect: kind,
            pretrain: pretrain_report,
            finetune: finetune_report,
            skipped,
            hygiene,
        };
        write_json(&dir.join("report.json"), &summary)?;
        summaries.push(summary);
    }
    Ok(summaries)
}

pub fn read_dataset(path: &Path) -> Result<Vec<DatasetInstance>, PipelineError> {
    let file = std::fs::File::open(path).map_err(io_at(path))?;
    Ok(read_jsonl(std::io::BufReader::new(file))?)
}

// ----------------------------------------------------------------- eval

fn backend(cfg: &PipelineConfig) -> Box<dyn TimingBackend> {
    match cfg.bench.backend {
        Backend::Wallclock => Box::new(WallClock { reps: cfg.bench.reps }),
        Backend::Simulator => Box::new(Simulator {
            cmd_template: cfg.bench.simulator_cmd.clone(),
        }),
    }
}

/// Benchmarks every candidate against the original (unannotated) input
/// program on its problem's test cases and writes `<label>.json`/`.txt`.
pub fn cmd_eval(
    cfg: &PipelineConfig,
    candidates_path: &Path,
    label: &str,
    jobs: usize,
) -> Result<EvalReport, PipelineError> {
    let file = std::fs::File::open(candidates_path).map_err(io_at(candidates_path))?;
    let candidates: Vec<Candidate> = read_jsonl(std::io::BufReader::new(file))?;
    if candidates.is_empty() {
        return Err(EvalError::EmptyInput.into());
    }
    check_toolchain(&cfg.bench.compiler)?;
    let backend = backend(cfg);
    backend.check_available()?;
    let corpus = load_corpus(cfg)?;
    let timeout = Duration::from_secs_f64(cfg.bench.case_timeout_s);

    let run_one = |c: &Candidate| -> Result<crate::eval::EvalRecord, String> {
        let inst = &c.instance;
        let input_id = &inst.meta.program_id;
        let input = corpus
            .program(input_id)
            .ok_or_else(|| format!("input program {input_id} is not in the corpus"))?;
        let tests = corpus.tests_for(input_id);
        if tests.is_empty() {
            return Err(format!("problem of {input_id} has no test cases"));
        }
        let generated_id = format!("{}__generated", inst.id);
        let job = PairJob {
            pair_id: &inst.id,
            input_program_id: input_id,
            input_source: &input.text(),
            generated_program_id: &generated_id,
            generated_source: &c.generated,
        };
        evaluate_pair(&job, tests, &cfg.bench.compiler, backend.as_ref(), timeout).map_err(|e| e.to_string())
    };

    let threads = if cfg.bench.sequential_timing { 1 } else { jobs };
    let results: Vec<(String, Result<crate::eval::EvalRecord, String>)> = thread_pool(threads)
        .install(|| candidates.par_iter().map(|c| (c.instance.id.clone(), run_one(c))).collect());

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, r) in results {
        match r {
            Ok(rec) => records.push(rec),
            Err(error) => failures.push(ItemFailure { id, error }),
        }
    }
    failures.sort_by(|a, b| a.id.cmp(&b.id));
    let mut report = EvalReport::new(label, backend.name(), records)?;
    report.failures = failures;

    let out = &cfg.paths.reports;
    write_json(&out.join(format!("{label}.json")), &report)?;
    write_file(&out.join(format!("{label}.txt")), render_report(&report))?;
    Ok(report)
}

// -------------------------------------------------------------- compare

pub fn load_report(path: &Path) -> Result<EvalReport, PipelineError> {
    read_json(path)
}

/// Paired comparison of per-pair speedups of two evaluation reports.
pub fn compare_reports(treatment: &EvalReport, baseline: &EvalReport) -> Result<ComparisonReport, StatsError> {
    let side = |r: &EvalReport| -> Vec<(String, f64)> {
        r.records.iter().map(|x| (x.pair_id.clone(), x.speedup())).collect()
    };
    compare(&treatment.label, &side(treatment), &baseline.label, &side(baseline))
}

pub fn cmd_compare(
    cfg: &PipelineConfig,
    treatment: &Path,
    baseline: &Path,
) -> Result<ComparisonReport, PipelineError> {
    let t = load_report(treatment)?;
    let b = load_report(baseline)?;
    let cmp = compare_reports(&t, &b)?;
    let stem = format!("compare_{}_vs_{}", t.label, b.label);
    let out = &cfg.paths.reports;
    write_json(&out.join(format!("{stem}.json")), &cmp)?;
    write_file(&out.join(format!("{stem}.txt")), render_comparisons(std::slice::from_ref(&cmp)))?;
    Ok(cmp)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::write_corpus;
    use crate::trace::Split;

    fn config(root: &Path) -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.paths.corpus = root.join("corpus");
        cfg.paths.traces = root.join("traces");
        cfg.paths.datasets = root.join("datasets");
        cfg.paths.reports = root.join("reports");
        cfg
    }

    #[test]
    fn plan_caps_pool_and_keeps_all_slow_cases() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        write_corpus(
            &cfg.paths.corpus,
            &[(
                "P",
                Split::Train,
                vec![("p1", "a"), ("p2", "b"), ("s", "c"), ("f", "d")],
                vec![("1", "", ""), ("2", "", ""), ("3", "", "")],
            )],
            &[("s", "f")],
        )
        .unwrap();
        let corpus = load_corpus(&cfg).unwrap();
        let plan = trace_plan(&corpus, 4, 7);
        let pool: Vec<_> = plan.iter().filter(|(p, _)| p.starts_with('p')).collect();
        assert_eq!(pool.len(), 4);
        assert_eq!(plan.iter().filter(|(p, _)| p == "s").count(), 3);
        assert!(plan.iter().all(|(p, _)| p != "f"));
        assert_eq!(plan, trace_plan(&corpus, 4, 7));
    }

    #[test]
    fn missing_adapter_fails_every_item() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path());
        cfg.tracer.adapter_cmd = "no-such-adapter-xyz".into();
        write_corpus(&cfg.paths.corpus, &[("P", Split::Train, vec![("a", "x"), ("b", "y")], vec![("1", "", "")])], &[]).unwrap();
        let err = cmd_trace(&cfg, 1).unwrap_err();
        assert!(matches!(err, PipelineError::AdapterUnavailable(_)));
        let summary: TraceSummary = read_json(&cfg.paths.traces.join("summary.json")).unwrap();
        assert_eq!((summary.total, summary.failed), (2, 2));
    }

    #[test]
    fn empty_corpus_gives_empty_summary() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path());
        cfg.tracer.adapter_cmd = "sh".into();
        let s = cmd_trace(&cfg, 1).unwrap();
        assert_eq!(s.total, 0);
    }

    #[test]
    fn dataset_without_traces_is_missing_traces() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        write_corpus(
            &cfg.paths.corpus,
            &[("P", Split::Train, vec![("a", "int main(){}"), ("s", "int main(){}"), ("f", "int main(){}")], vec![("1", "", "")])],
            &[("s", "f")],
        )
        .unwrap();
        for s in [Strategy::S1, Strategy::S2, Strategy::S3] {
            assert!(matches!(cmd_dataset(&cfg, s, Some(AspectKind::LE), false, 1), Err(PipelineError::MissingTraces(_))));
        }
        assert!(matches!(cmd_dataset(&cfg, Strategy::BL, None, true, 1), Err(PipelineError::MissingTraces(_))));
        let bl = cmd_dataset(&cfg, Strategy::BL, None, false, 1).unwrap();
        assert_eq!(bl.len(), 1);
        assert_eq!(bl[0].finetune.kept, 1);
        let set = read_dataset(&cfg.paths.datasets.join("BL/finetune.jsonl")).unwrap();
        assert_eq!(set[0].id, "s__f");
        assert_eq!(set[0].meta.token_counter, "punct");
    }

    #[test]
    fn dataset_names() {
        assert_eq!(dataset_name(Strategy::BL, Some(AspectKind::LE), false), "BL");
        assert_eq!(dataset_name(Strategy::BL, None, true), "BL-traced");
        assert_eq!(dataset_name(Strategy::S3, Some(AspectKind::VS), false), "S3-VS");
    }
}
