//! Compiling candidate programs and timing their runs.

use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use tempfile::TempDir;

use super::EvalError;
use crate::process::{find_executable, run_bounded, split_command, Termination};
use crate::trace::TestCase;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompilerConfig {
    pub compiler_cmd: String,
    pub compile_flags: String,
}

impl Default for CompilerConfig {
    fn default() -> Self {
        CompilerConfig {
            compiler_cmd: "g++".into(),
            compile_flags: "-std=c++17 -O2".into(),
        }
    }
}

/// A compiled binary; the directory holding it lives as long as the value.
#[derive(Debug)]
pub struct Artifact {
    dir: TempDir,
    binary: PathBuf,
}

impl Artifact {
    pub fn binary(&self) -> &Path {
        &self.binary
    }

    pub fn dir(&self) -> &Path {
        self.dir.path()
    }
}

pub fn check_toolchain(cfg: &CompilerConfig) -> Result<PathBuf, EvalError> {
    split_command(&cfg.compiler_cmd)
        .first()
        .and_then(find_executable)
        .ok_or_else(|| EvalError::ToolchainMissing(cfg.compiler_cmd.clone()))
}

/// Compiles C++ source text. A rejected program is `CompileError` with the
/// compiler's diagnostics.
pub fn compile(source: &str, cfg: &CompilerConfig) -> Result<Artifact, EvalError> {
    let exe = check_toolchain(cfg)?;
    let dir = tempfile::tempdir()?;
    let src = dir.path().join("main.cpp");
    let binary = dir.path().join("main");
    let mut text = source.to_owned();
    if !text.ends_with('\n') {
        text.push('\n');
    }
    std::fs::write(&src, text)?;
    let argv = split_command(&cfg.compiler_cmd);
    let mut cmd = Command::new(exe);
    cmd.args(&argv[1..])
        .args(split_command(&cfg.compile_flags))
        .arg("-o")
        .arg(&binary)
        .arg(&src);
    let done = run_bounded(cmd, None, Duration::from_secs(120))?;
    if !done.success() {
        return Err(EvalError::CompileError(
            String::from_utf8_lossy(&done.stderr).into_owned(),
        ));
    }
    Ok(Artifact { dir, binary })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Ok,
    RuntimeError,
    Timeout,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub compile_ok: bool,
    pub run_status: RunStatus,
    pub stdout: String,
    /// Seconds, as reported by the timing backend.
    pub time: f64,
}

/// Measures one run of a binary on one input.
pub trait TimingBackend: Send + Sync {
    fn name(&self) -> &str;

    fn check_available(&self) -> Result<(), EvalError>;

    fn run(&self, binary: &Path, stdin: &Path, timeout: Duration) -> Result<RunOutcome, EvalError>;
}

fn status_of(t: Termination) -> RunStatus {
    match t {
        Termination::Exited(0) => RunStatus::Ok,
        Termination::TimedOut => RunStatus::Timeout,
        _ => RunStatus::RuntimeError,
    }
}

/// Host wall-clock time, minimum over `reps` runs.
#[derive(Debug, Clone)]
pub struct WallClock {
    pub reps: u32,
}

impl TimingBackend for WallClock {
    fn name(&self) -> &str {
        "wallclock"
    }

    fn check_available(&self) -> Result<(), EvalError> {
        Ok(())
    }

    fn run(&self, binary: &Path, stdin: &Path, timeout: Duration) -> Result<RunOutcome, EvalError> {
        let mut best: Option<RunOutcome> = None;
        for _ in 0..self.reps.max(1) {
            let done = run_bounded(Command::new(binary), Some(stdin), timeout)?;
            let outcome = RunOutcome {
                compile_ok: true,
                run_status: status_of(done.termination),
                stdout: String::from_utf8_lossy(&done.stdout).into_owned(),
                time: done.elapsed.as_secs_f64(),
            };
            if outcome.run_status != RunStatus::Ok {
                return Ok(outcome);
            }
            best = Some(match best {
                Some(b) if b.time <= outcome.time => b,
                _ => outcome,
            });
        }
        Ok(best.expect("at least one repetition"))
    }
}

/// A deterministic simulator driven by a command template. `{binary}`,
/// `{input}` and `{outdir}` are substituted; after the command exits the
/// program's stdout is read from `{outdir}/program.out` (falling back to the
/// command's own stdout) and simulated seconds from the `simSeconds` (or
/// `sim_seconds`) entry of `{outdir}/stats.txt`.
#[derive(Debug, Clone)]
pub struct Simulator {
    pub cmd_template: String,
}

/// Reads the simulated-seconds statistic from a stats file.
pub fn parse_sim_seconds(stats: &str) -> Option<f64> {
    stats.lines().find_map(|line| {
        let mut parts = line.split_whitespace();
        match parts.next()? {
            "simSeconds" | "sim_seconds" => parts.next()?.parse().ok(),
            _ => None,
        }
    })
}

impl TimingBackend for Simulator {
    fn name(&self) -> &str {
        "simulator"
    }

    fn check_available(&self) -> Result<(), EvalError> {
        match split_command(&self.cmd_template).first() {
            Some(p) if find_executable(p).is_some() => Ok(()),
            _ => Err(EvalError::BackendUnavailable(self.cmd_template.clone())),
        }
    }

    fn run(&self, binary: &Path, stdin: &Path, timeout: Duration) -> Result<RunOutcome, EvalError> {
        self.check_available()?;
        let outdir = tempfile::tempdir()?;
        let argv: Vec<String> = split_command(&self.cmd_template)
            .into_iter()
            .map(|a| {
                a.replace("{binary}", &binary.to_string_lossy())
                    .replace("{input}", &stdin.to_string_lossy())
                    .replace("{outdir}", &outdir.path().to_string_lossy())
            })
            .collect();
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]);
        let done = run_bounded(cmd, Some(stdin), timeout)?;
        let status = status_of(done.termination);
        let stdout = match std::fs::read(outdir.path().join("program.out")) {
            Ok(bytes) => String::from_utf8_lossy(&bytes).into_owned(),
            Err(_) => String::from_utf8_lossy(&done.stdout).into_owned(),
        };
        if status != RunStatus::Ok {
            return Ok(RunOutcome {
                compile_ok: true,
                run_status: status,
                stdout,
                time: done.elapsed.as_secs_f64(),
            });
        }
        let stats = std::fs::read_to_string(outdir.path().join("stats.txt")).unwrap_or_default();
        let time = parse_sim_seconds(&stats).ok_or_else(|| {
            EvalError::BackendUnavailable(format!(
                "`{}` produced no simulated-seconds statistic",
                self.cmd_template
            ))
        })?;
        Ok(RunOutcome {
            compile_ok: true,
            run_status: status,
            stdout,
            time,
        })
    }
}

/// Runs `artifact` on one test case.
pub fn execute(
    artifact: &Artifact,
    test: &TestCase,
    backend: &dyn TimingBackend,
    timeout: Duration,
) -> Result<RunOutcome, EvalError> {
    let input = artifact.dir().join(format!("input-{}.txt", sanitize(&test.case_id)));
    std::fs::write(&input, &test.stdin)?;
    backend.run(artifact.binary(), &input, timeout)
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}
