//! Program, test-case and execution-trace data model.
//!
//! A trace is an ordered list of line stops. Each stop carries the variables
//! visible in the current frame at the moment the debugger halted on that
//! line (i.e. before the line executed). Traces are stored in a small
//! line-oriented text format, see [`format`].

mod collect;
pub mod format;
pub mod gdb;
mod mi;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use collect::{
    collect_trace, compile_for_tracing, DebuggerAdapter, ExternalAdapter, TracerConfig,
    DEFAULT_TIME_CAP_SECS, TEARDOWN_GRACE_SECS,
};
pub use format::{parse_trace, parse_trace_for, serialize_trace};
pub use gdb::GdbMiAdapter;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("malformed trace (line {line}): {reason}")]
    MalformedTrace { line: usize, reason: String },
    #[error("trace status is {0}, a complete trace is required")]
    IncompleteTrace(TraceStatus),
    #[error("compilation failed:\n{0}")]
    CompileFailed(String),
    #[error("debugger adapter unavailable: {0}")]
    AdapterUnavailable(String),
    #[error("debugger adapter protocol error: {0}")]
    Adapter(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl TraceError {
    pub(crate) fn malformed(line: usize, reason: impl Into<String>) -> Self {
        TraceError::MalformedTrace {
            line,
            reason: reason.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    #[serde(alias = "val")]
    Validation,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" | "val" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// A source program split into lines. Line indices are 1-based everywhere.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProgram {
    pub program_id: String,
    pub problem_id: String,
    pub lines: Vec<String>,
    pub split: Split,
}

impl SourceProgram {
    pub fn new(
        program_id: impl Into<String>,
        problem_id: impl Into<String>,
        text: &str,
        split: Split,
    ) -> Self {
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        if lines.is_empty() {
            lines.push(String::new());
        }
        SourceProgram {
            program_id: program_id.into(),
            problem_id: problem_id.into(),
            lines,
            split,
        }
    }

    pub fn len(&self) -> usize {
        self.lines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lines.is_empty()
    }

    /// 1-based accessor.
    pub fn line(&self, line_no: usize) -> Option<&str> {
        line_no
            .checked_sub(1)
            .and_then(|i| self.lines.get(i))
            .map(String::as_str)
    }

    /// Lines joined with `\n`, no trailing newline.
    pub fn text(&self) -> String {
        self.lines.join("\n")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub case_id: String,
    pub stdin: String,
    pub expected_stdout: String,
}

/// The value half of a variable snapshot.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarValue {
    Unassigned,
    Value(String),
}

impl VarValue {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            VarValue::Unassigned => None,
            VarValue::Value(v) => Some(v),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VariableSnapshot {
    pub name: String,
    pub declared_type: String,
    pub value: VarValue,
}

impl VariableSnapshot {
    pub fn new(name: impl Into<String>, declared_type: impl Into<String>, value: VarValue) -> Self {
        VariableSnapshot {
            name: name.into(),
            declared_type: declared_type.into(),
            value,
        }
    }

    pub fn assigned(
        name: impl Into<String>,
        declared_type: impl Into<String>,
        value: impl Into<String>,
    ) -> Self {
        Self::new(name, declared_type, VarValue::Value(value.into()))
    }

    pub fn unassigned(name: impl Into<String>, declared_type: impl Into<String>) -> Self {
        Self::new(name, declared_type, VarValue::Unassigned)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceStep {
    pub line_no: usize,
    pub variables: Vec<VariableSnapshot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TraceStatus {
    Complete,
    Timeout,
    Crashed,
}

impl TraceStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceStatus::Complete => "complete",
            TraceStatus::Timeout => "timeout",
            TraceStatus::Crashed => "crashed",
        }
    }
}

impl fmt::Display for TraceStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TraceStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "complete" => Ok(TraceStatus::Complete),
            "timeout" => Ok(TraceStatus::Timeout),
            "crashed" => Ok(TraceStatus::Crashed),
            other => Err(format!("unknown status `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExecutionTrace {
    pub program_id: String,
    pub case_id: String,
    pub steps: Vec<TraceStep>,
    pub status: TraceStatus,
    /// Seconds.
    pub wall_time: f64,
}

impl ExecutionTrace {
    pub fn is_complete(&self) -> bool {
        self.status == TraceStatus::Complete
    }

    pub fn require_complete(&self) -> Result<(), TraceError> {
        if self.is_complete() {
            Ok(())
        } else {
            Err(TraceError::IncompleteTrace(self.status))
        }
    }
}

/// Final state of every variable seen in the trace: the snapshot from the
/// last step in which the name appears, ordered by first appearance.
pub fn final_states(trace: &ExecutionTrace) -> Result<Vec<VariableSnapshot>, TraceError> {
    trace.require_complete()?;
    let mut order: Vec<&str> = Vec::new();
    let mut last: HashMap<&str, &VariableSnapshot> = HashMap::new();
    for var in trace.steps.iter().flat_map(|s| s.variables.iter()) {
        if last.insert(var.name.as_str(), var).is_none() {
            order.push(var.name.as_str());
        }
    }
    Ok(order.into_iter().map(|name| last[name].clone()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(line_no: usize, vars: &[(&str, &str, Option<&str>)]) -> TraceStep {
        TraceStep {
            line_no,
            variables: vars
                .iter()
                .map(|(n, t, v)| match v {
                    Some(v) => VariableSnapshot::assigned(*n, *t, *v),
                    None => VariableSnapshot::unassigned(*n, *t),
                })
                .collect(),
        }
    }

    fn trace(steps: Vec<TraceStep>) -> ExecutionTrace {
        ExecutionTrace {
            program_id: "p".into(),
            case_id: "c".into(),
            steps,
            status: TraceStatus::Complete,
            wall_time: 0.0,
        }
    }

    #[test]
    fn final_states_last_assignment_wins() {
        let t = trace(vec![
            step(1, &[("a", "int", None), ("b", "int", None)]),
            step(2, &[("a", "int", Some("1")), ("b", "int", Some("1"))]),
            step(3, &[("a", "int", Some("1")), ("b", "int", Some("2"))]),
            step(3, &[("a", "int", Some("1")), ("b", "int", Some("3"))]),
        ]);
        let fin = final_states(&t).unwrap();
        assert_eq!(
            fin,
            vec![
                VariableSnapshot::assigned("a", "int", "1"),
                VariableSnapshot::assigned("b", "int", "3"),
            ]
        );
    }

    #[test]
    fn final_states_keeps_unassigned_marker() {
        let t = trace(vec![step(1, &[("y", "int", None)])]);
        assert_eq!(final_states(&t).unwrap()[0].value, VarValue::Unassigned);
    }

    #[test]
    fn final_states_uses_last_step_where_name_appears() {
        // `i` leaves scope after step 2; its value from step 2 is final.
        let t = trace(vec![
            step(1, &[("i", "int", Some("0"))]),
            step(2, &[("s", "int", Some("0")), ("i", "int", Some("4"))]),
            step(3, &[("s", "int", Some("7"))]),
        ]);
        let fin = final_states(&t).unwrap();
        assert_eq!(fin[0], VariableSnapshot::assigned("i", "int", "4"));
        assert_eq!(fin[1], VariableSnapshot::assigned("s", "int", "7"));
    }

    #[test]
    fn final_states_rejects_incomplete() {
        let mut t = trace(vec![]);
        t.status = TraceStatus::Timeout;
        assert!(matches!(
            final_states(&t),
            Err(TraceError::IncompleteTrace(TraceStatus::Timeout))
        ));
    }
}
