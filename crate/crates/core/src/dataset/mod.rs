//! Training and evaluation instances: encodings, canonicalization, token
//! limits, sampling and split hygiene.

pub mod canon;
pub mod encode;
pub mod mlm;
pub mod select;
pub mod tokens;

use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::{AspectError, AspectKind};
use crate::trace::Split;

pub use canon::{canonicalize, strip_comments, Formatter};
pub use encode::{
    annotate_slow_code, build_exec_pretrain, build_optimize, pair_id, strip_annotations, SEP,
};
pub use mlm::{build_mlm, restore_mlm, DEFAULT_MASK_RATE};
pub use select::{
    cap_per_problem, check_split_hygiene, filter_by_token_limit, interleave, select_trace_for_s3,
    within_limit, DropReport, HygieneReport, HygieneViolation, DEFAULT_PER_PROBLEM_CAP,
    DEFAULT_TOKEN_LIMIT, MERGED_CASE_ID,
};
pub use tokens::{
    counter_from_setting, split_tokens, PunctuationCounter, SubprocessCounter, TokenCounter,
};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("aspects belong to {found}, expected {expected}")]
    AspectMismatch { expected: String, found: String },
    #[error("slow program is for problem {slow}, fast program for {fast}")]
    ProblemMismatch { slow: String, fast: String },
    #[error("program has no tokens")]
    EmptyProgram,
    #[error("no complete traces to select from")]
    NoCompleteTraces,
    #[error("formatter unavailable: {0}")]
    FormatterUnavailable(String),
    #[error("formatter failed: {0}")]
    FormatterFailed(String),
    #[error("token counter failed: {0}")]
    TokenCounter(String),
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error(transparent)]
    Aspect(#[from] AspectError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classify,
    Optimize,
    Mlm,
}

impl Task {
    pub fn prefix(self) -> &'static str {
        match self {
            Task::Classify => "classify: ",
            Task::Optimize => "optimize: ",
            Task::Mlm => "mlm: ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Strategy {
    BL,
    S1,
    S2,
    S3,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::BL, Strategy::S1, Strategy::S2, Strategy::S3];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::BL => "BL",
            Strategy::S1 => "S1",
            Strategy::S2 => "S2",
            Strategy::S3 => "S3",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "BL" => Ok(Strategy::BL),
            "S1" => Ok(Strategy::S1),
            "S2" => Ok(Strategy::S2),
            "S3" => Ok(Strategy::S3),
            _ => Err(format!("unknown strategy `{s}` (expected BL, S1, S2 or S3)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub program_id: String,
    pub case_id: Option<String>,
    pub aspect: Option<AspectKind>,
    pub strategy: Strategy,
    pub problem_id: String,
    pub split: Split,
    pub token_counter: String,
    /// Target program of an optimize instance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fast_program_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetInstance {
    pub id: String,
    pub task: Task,
    pub source: String,
    pub target: String,
    pub meta: InstanceMeta,
}

/// A dataset record paired with a model's output program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Candidate {
    #[serde(flatten)]
    pub instance: DatasetInstance,
    pub generated: String,
}

/// One JSON object per line.
pub fn write_jsonl<T: Serialize, W: Write>(out: &mut W, records: &[T]) -> io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn to_jsonl<T: Serialize>(records: &[T]) -> String {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, records).expect("writing to memory");
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// Parses one record per non-empty line; errors carry 1-based line numbers.
pub fn read_jsonl<T: for<'de> Deserialize<'de>, R: BufRead>(input: R) -> Result<Vec<T>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| DatasetError::Format {
            line: i + 1,
            reason: e.to_string(),
        })?);
    }
    Ok(out)
}
