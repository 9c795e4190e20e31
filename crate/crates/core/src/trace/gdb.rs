//! Reference debugger adapter: single-steps a program under GDB's machine
//! interface and snapshots the current frame's variables at every stop in
//! the traced source file.
//!
//! Calls into code outside the traced file (library headers, libc) are left
//! with `-exec-finish`; the mid-line stop that follows is not recorded, so
//! every recorded step is the start of a source line.

use std::collections::{HashMap, HashSet};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::debug;

use super::collect::TraceRequest;
use super::mi::{parse_record, MiRecord, MiValue};
use super::{
    DebuggerAdapter, ExecutionTrace, SourceProgram, TraceError, TraceStatus, TraceStep, VarValue,
    VariableSnapshot,
};
use crate::process::find_executable;

/// Placeholder value for variables whose type has no scalar rendering.
pub const COMPOSITE_VALUE: &str = "{...}";

#[derive(Debug, Clone)]
pub struct GdbMiAdapter {
    gdb: String,
}

impl GdbMiAdapter {
    pub fn new(gdb: impl Into<String>) -> Self {
        GdbMiAdapter { gdb: gdb.into() }
    }
}

impl Default for GdbMiAdapter {
    fn default() -> Self {
        Self::new("gdb")
    }
}

impl DebuggerAdapter for GdbMiAdapter {
    fn name(&self) -> &str {
        &self.gdb
    }

    fn check_available(&self) -> Result<(), TraceError> {
        find_executable(&self.gdb)
            .map(|_| ())
            .ok_or_else(|| TraceError::AdapterUnavailable(format!("`{}` not found", self.gdb)))
    }

    fn trace(&self, req: &TraceRequest<'_>) -> Result<ExecutionTrace, TraceError> {
        self.check_available()?;
        let start = Instant::now();
        let deadline = start + req.time_cap;
        let mut session = Session::spawn(&self.gdb, req.binary, deadline)?;
        let outcome = session.run(req);
        session.shutdown();
        let (status, steps) = match outcome {
            Ok(done) => done,
            Err(Interrupted::Deadline(steps)) => (TraceStatus::Timeout, steps),
            Err(Interrupted::Failed(e)) => return Err(e),
        };
        Ok(ExecutionTrace {
            program_id: req.program.program_id.clone(),
            case_id: String::new(),
            steps,
            status,
            wall_time: start.elapsed().as_secs_f64(),
        })
    }
}

enum Interrupted {
    Deadline(Vec<TraceStep>),
    Failed(TraceError),
}

impl From<TraceError> for Interrupted {
    fn from(e: TraceError) -> Self {
        Interrupted::Failed(e)
    }
}

enum Wait {
    Deadline,
    Failed(TraceError),
}

struct Session {
    child: Child,
    stdin: ChildStdin,
    lines: Receiver<String>,
    deadline: Instant,
    inferior_pid: Option<i32>,
}

/// Per-depth record of which names were visible at the previous stop.
struct FrameScopes {
    frames: Vec<(String, HashSet<String>)>,
}

impl Session {
    fn spawn(gdb: &str, binary: &Path, deadline: Instant) -> Result<Self, TraceError> {
        let mut child = Command::new(gdb)
            .args(["--nx", "-q", "--interpreter=mi2"])
            .arg(binary)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| TraceError::AdapterUnavailable(format!("cannot start `{gdb}`: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let Ok(line) = line else { break };
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        Ok(Session {
            child,
            stdin,
            lines: rx,
            deadline,
            inferior_pid: None,
        })
    }

    fn send(&mut self, cmd: &str) -> Result<(), Wait> {
        debug!("gdb <- {cmd}");
        writeln!(self.stdin, "{cmd}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| Wait::Failed(TraceError::Adapter(format!("gdb stdin closed: {e}"))))
    }

    fn next_record(&mut self) -> Result<MiRecord, Wait> {
        loop {
            let left = self.deadline.saturating_duration_since(Instant::now());
            if left.is_zero() {
                return Err(Wait::Deadline);
            }
            let line = match self.lines.recv_timeout(left) {
                Ok(line) => line,
                Err(RecvTimeoutError::Timeout) => return Err(Wait::Deadline),
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Wait::Failed(TraceError::Adapter(
                        "gdb exited unexpectedly".into(),
                    )))
                }
            };
            let Some(rec) = parse_record(&line) else {
                continue;
            };
            if let MiRecord::Notify { class, body } = &rec {
                if class == "thread-group-started" {
                    self.inferior_pid = body.get_str("pid").and_then(|p| p.parse().ok());
                }
            }
            return Ok(rec);
        }
    }

    /// Sends a command and waits for its `^` result record.
    fn command(&mut self, cmd: &str) -> Result<Result<MiValue, String>, Wait> {
        self.send(cmd)?;
        loop {
            if let MiRecord::Result { class, body } = self.next_record()? {
                return Ok(match class.as_str() {
                    "error" => Err(body.get_str("msg").unwrap_or("").to_owned()),
                    _ => Ok(body),
                });
            }
        }
    }

    fn command_ok(&mut self, cmd: &str) -> Result<MiValue, Wait> {
        self.command(cmd)?.map_err(|msg| {
            Wait::Failed(TraceError::Adapter(format!("`{cmd}` failed: {msg}")))
        })
    }

    fn wait_stopped(&mut self) -> Result<MiValue, Wait> {
        loop {
            if let MiRecord::Exec { class, body } = self.next_record()? {
                if class == "stopped" {
                    return Ok(body);
                }
            }
        }
    }

    /// Issues an execution command and waits for the resulting stop.
    fn resume(&mut self, cmd: &str) -> Result<MiValue, Wait> {
        self.command_ok(cmd)?;
        self.wait_stopped()
    }

    fn run(&mut self, req: &TraceRequest<'_>) -> Result<(TraceStatus, Vec<TraceStep>), Interrupted> {
        let mut steps = Vec::new();
        match self.drive(req, &mut steps) {
            Ok(status) => Ok((status, steps)),
            Err(Wait::Deadline) => Err(Interrupted::Deadline(steps)),
            Err(Wait::Failed(e)) => Err(Interrupted::Failed(e)),
        }
    }

    fn drive(
        &mut self,
        req: &TraceRequest<'_>,
        steps: &mut Vec<TraceStep>,
    ) -> Result<TraceStatus, Wait> {
        let source_name = req
            .source
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        let first_mentions = first_mention_lines(req.program);
        let mut scopes = FrameScopes { frames: Vec::new() };
        let mut last_line = 0;

        self.command_ok("-break-insert -t *main")?;
        self.command_ok(&format!(
            "-exec-arguments < {} > /dev/null",
            req.stdin.display()
        ))?;
        let mut stop = self.resume("-exec-run")?;

        loop {
            let reason = stop.get_str("reason").unwrap_or("").to_owned();
            match reason.as_str() {
                "exited-normally" => return Ok(TraceStatus::Complete),
                "exited" | "exited-signalled" | "signal-received" => {
                    return Ok(TraceStatus::Crashed)
                }
                "breakpoint-hit" | "end-stepping-range" | "function-finished"
                | "location-reached" => {}
                other => {
                    debug!("unexpected stop reason `{other}`");
                    return Ok(TraceStatus::Crashed);
                }
            }

            let frame = stop.get("frame").cloned().unwrap_or(MiValue::List(vec![]));
            let in_source = frame_in_source(&frame, &source_name);
            if !in_source {
                let stack = self.command_ok("-stack-list-frames")?;
                let returns_to_source = stack
                    .get("stack")
                    .map(|s| s.items().iter().any(|f| frame_in_source(f, &source_name)))
                    .unwrap_or(false);
                stop = if returns_to_source {
                    self.resume("-exec-finish")?
                } else {
                    self.resume("-exec-continue")?
                };
                continue;
            }

            let line_no: usize = frame
                .get_str("line")
                .and_then(|l| l.parse().ok())
                .unwrap_or(0);
            // A finish lands just after the call. That is mid-line unless the
            // call was the last instruction of its line, in which case the
            // stop is the start of the next line and counts as a step.
            let mid_line = reason == "function-finished" && line_no == last_line;
            if !mid_line && (1..=req.program.len()).contains(&line_no) {
                let func = frame.get_str("func").unwrap_or("").to_owned();
                let variables = self.snapshot(line_no, &func, &first_mentions, &mut scopes)?;
                steps.push(TraceStep { line_no, variables });
                last_line = line_no;
            }
            stop = self.resume("-exec-step")?;
        }
    }

    fn snapshot(
        &mut self,
        line_no: usize,
        func: &str,
        first_mentions: &HashMap<String, usize>,
        scopes: &mut FrameScopes,
    ) -> Result<Vec<VariableSnapshot>, Wait> {
        let depth: usize = self
            .command_ok("-stack-info-depth")?
            .get_str("depth")
            .and_then(|d| d.parse().ok())
            .unwrap_or(1);
        let listed = self.command_ok("-stack-list-variables --simple-values")?;

        scopes.frames.truncate(depth);
        let previously_visible = match scopes.frames.get(depth - 1) {
            Some((f, names)) if f == func => names.clone(),
            _ => HashSet::new(),
        };

        let mut visible = HashSet::new();
        let mut vars = Vec::new();
        for v in listed.get("variables").map(MiValue::items).unwrap_or(&[]) {
            let Some(name) = v.get_str("name") else {
                continue;
            };
            let ty = v.get_str("type").unwrap_or("");
            let is_arg = v.get_str("arg").is_some();
            let not_yet_declared = first_mentions
                .get(name)
                .is_some_and(|&first| line_no <= first);
            let unassigned = !is_arg && (!previously_visible.contains(name) || not_yet_declared);
            let value = if unassigned {
                VarValue::Unassigned
            } else {
                VarValue::Value(v.get_str("value").unwrap_or(COMPOSITE_VALUE).to_owned())
            };
            visible.insert(name.to_owned());
            vars.push(VariableSnapshot::new(name, ty, value));
        }

        if scopes.frames.len() < depth {
            scopes
                .frames
                .resize_with(depth, || (String::new(), HashSet::new()));
        }
        scopes.frames[depth - 1] = (func.to_owned(), visible);
        Ok(vars)
    }

    fn shutdown(mut self) {
        if let Some(pid) = self.inferior_pid {
            // SAFETY: plain kill(2) on a pid we were told about by gdb.
            unsafe {
                libc::kill(pid, libc::SIGKILL);
            }
        }
        let _ = writeln!(self.stdin, "-gdb-exit");
        let _ = self.stdin.flush();
        let grace = Instant::now() + Duration::from_secs(1);
        while Instant::now() < grace {
            if let Ok(Some(_)) = self.child.try_wait() {
                return;
            }
            thread::sleep(Duration::from_millis(10));
        }
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

fn frame_in_source(frame: &MiValue, source_name: &str) -> bool {
    ["fullname", "file"].iter().any(|key| {
        frame
            .get_str(key)
            .and_then(|p| Path::new(p).file_name())
            .is_some_and(|n| n.to_string_lossy() == source_name)
    })
}

/// First line on which each identifier occurs in the program text. A stop
/// at or before that line precedes the declaration, so the debugger's value
/// is uninitialized memory.
fn first_mention_lines(program: &SourceProgram) -> HashMap<String, usize> {
    let mut first = HashMap::new();
    for (idx, line) in program.lines.iter().enumerate() {
        for ident in identifiers(line) {
            first.entry(ident.to_owned()).or_insert(idx + 1);
        }
    }
    first
}

fn identifiers(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| !(c.is_ascii_alphanumeric() || c == '_'))
        .filter(|w| w.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_'))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::Split;

    #[test]
    fn first_mentions_are_whole_words() {
        let p = SourceProgram::new(
            "p",
            "q",
            "int main() {\nint s=0, sum=1;\nfor (int i=0;i<3;i++) s+=i;\n}",
            Split::Train,
        );
        let m = first_mention_lines(&p);
        assert_eq!(m["s"], 2);
        assert_eq!(m["sum"], 2);
        assert_eq!(m["i"], 3);
        assert_eq!(m["main"], 1);
    }
}
