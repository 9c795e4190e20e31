use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{parse_trace_for, ExecutionTrace, SourceProgram, TestCase, TraceError, TraceStatus};
use crate::process::{find_executable, run_bounded, split_command, Termination};

pub const DEFAULT_TIME_CAP_SECS: f64 = 500.0;
/// Extra time allowed for tearing down the debugger after the cap fires.
pub const TEARDOWN_GRACE_SECS: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TracerConfig {
    pub time_cap_s: f64,
    /// `gdb` (or a path to a gdb binary) selects the built-in GDB/MI adapter;
    /// anything else is run as an external adapter command.
    pub adapter_cmd: String,
    pub compiler_cmd: String,
    pub compile_flags: String,
}

impl Default for TracerConfig {
    fn default() -> Self {
        TracerConfig {
            time_cap_s: DEFAULT_TIME_CAP_SECS,
            adapter_cmd: "gdb".into(),
            compiler_cmd: "g++".into(),
            compile_flags: "-std=c++17 -g -O0".into(),
        }
    }
}

impl TracerConfig {
    pub fn time_cap(&self) -> Duration {
        Duration::from_secs_f64(self.time_cap_s)
    }

    pub fn adapter(&self) -> Box<dyn DebuggerAdapter> {
        let first = split_command(&self.adapter_cmd)
            .into_iter()
            .next()
            .unwrap_or_default();
        let is_gdb = Path::new(&first)
            .file_name()
            .is_some_and(|n| n.to_string_lossy().starts_with("gdb"));
        if is_gdb {
            Box::new(super::GdbMiAdapter::new(first))
        } else {
            Box::new(ExternalAdapter::new(self.adapter_cmd.clone()))
        }
    }
}

/// What an adapter is asked to trace.
#[derive(Debug)]
pub struct TraceRequest<'a> {
    pub binary: &'a Path,
    pub stdin: &'a Path,
    pub source: &'a Path,
    pub program: &'a SourceProgram,
    pub time_cap: Duration,
}

/// Drives a debugger over one compiled program run.
///
/// Implementations must return within `time_cap` plus
/// [`TEARDOWN_GRACE_SECS`], reporting [`TraceStatus::Timeout`] when the cap
/// fires. `program_id`/`case_id` of the returned trace are overwritten by
/// [`collect_trace`].
pub trait DebuggerAdapter: Send + Sync {
    fn name(&self) -> &str;

    fn check_available(&self) -> Result<(), TraceError>;

    fn trace(&self, req: &TraceRequest<'_>) -> Result<ExecutionTrace, TraceError>;
}

/// An external program invoked as `<cmd> <binary> <stdin-file> <cap-seconds>`
/// that prints a canonical trace document on stdout.
#[derive(Debug, Clone)]
pub struct ExternalAdapter {
    cmd: String,
}

impl ExternalAdapter {
    pub fn new(cmd: impl Into<String>) -> Self {
        ExternalAdapter { cmd: cmd.into() }
    }
}

impl DebuggerAdapter for ExternalAdapter {
    fn name(&self) -> &str {
        &self.cmd
    }

    fn check_available(&self) -> Result<(), TraceError> {
        let argv = split_command(&self.cmd);
        match argv.first() {
            Some(prog) if find_executable(prog).is_some() => Ok(()),
            _ => Err(TraceError::AdapterUnavailable(format!(
                "adapter command `{}` not found",
                self.cmd
            ))),
        }
    }

    fn trace(&self, req: &TraceRequest<'_>) -> Result<ExecutionTrace, TraceError> {
        self.check_available()?;
        let argv = split_command(&self.cmd);
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..])
            .arg(req.binary)
            .arg(req.stdin)
            .arg(format!("{}", req.time_cap.as_secs_f64()));
        let limit = req.time_cap + Duration::from_secs_f64(TEARDOWN_GRACE_SECS);
        let done = run_bounded(cmd, None, limit)?;
        if done.termination == Termination::TimedOut {
            return Ok(ExecutionTrace {
                program_id: req.program.program_id.clone(),
                case_id: String::new(),
                steps: Vec::new(),
                status: TraceStatus::Timeout,
                wall_time: done.elapsed.as_secs_f64(),
            });
        }
        if !done.success() {
            return Err(TraceError::Adapter(format!(
                "adapter exited with {:?}: {}",
                done.termination,
                String::from_utf8_lossy(&done.stderr)
            )));
        }
        let doc = String::from_utf8(done.stdout)
            .map_err(|_| TraceError::Adapter("adapter output is not UTF-8".into()))?;
        parse_trace_for(&doc, req.program)
    }
}

/// Compiles `program` unoptimized with debug info into `dir`.
pub fn compile_for_tracing(
    program: &SourceProgram,
    cfg: &TracerConfig,
    dir: &Path,
) -> Result<(PathBuf, PathBuf), TraceError> {
    let source = dir.join("prog.cpp");
    let binary = dir.join("prog");
    let mut text = program.text();
    text.push('\n');
    std::fs::write(&source, text)?;

    let compiler = split_command(&cfg.compiler_cmd);
    let Some(exe) = compiler.first().and_then(find_executable) else {
        return Err(TraceError::CompileFailed(format!(
            "compiler `{}` not found",
            cfg.compiler_cmd
        )));
    };
    let mut cmd = Command::new(exe);
    cmd.args(&compiler[1..])
        .args(split_command(&cfg.compile_flags))
        .arg("-o")
        .arg(&binary)
        .arg(&source);
    let done = run_bounded(cmd, None, Duration::from_secs(120))?;
    if !done.success() {
        return Err(TraceError::CompileFailed(
            String::from_utf8_lossy(&done.stderr).into_owned(),
        ));
    }
    Ok((source, binary))
}

/// Compiles and traces one program on one test case.
pub fn collect_trace(
    program: &SourceProgram,
    test: &TestCase,
    cfg: &TracerConfig,
    adapter: &dyn DebuggerAdapter,
) -> Result<ExecutionTrace, TraceError> {
    adapter.check_available()?;
    let dir = tempfile::tempdir()?;
    let (source, binary) = compile_for_tracing(program, cfg, dir.path())?;
    let stdin = dir.path().join("stdin.txt");
    std::fs::write(&stdin, &test.stdin)?;

    let mut trace = adapter.trace(&TraceRequest {
        binary: &binary,
        stdin: &stdin,
        source: &source,
        program,
        time_cap: cfg.time_cap(),
    })?;
    trace.program_id = program.program_id.clone();
    trace.case_id = test.case_id.clone();
    if trace.wall_time >= cfg.time_cap_s {
        trace.status = TraceStatus::Timeout;
    }
    if let Some(bad) = trace.steps.iter().find(|s| s.line_no > program.len()) {
        return Err(TraceError::Adapter(format!(
            "adapter reported line {} beyond program end",
            bad.line_no
        )));
    }
    Ok(trace)
}
