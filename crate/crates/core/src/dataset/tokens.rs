//! Token counting for length limits and the tokenizer used for masking.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::sync::Mutex;

use super::DatasetError;
use crate::process::{find_executable, split_command};

/// Splits on whitespace; each run of identifier characters is one token and
/// every other character is a token by itself. Returns byte spans.
pub fn split_tokens(text: &str) -> Vec<(usize, usize)> {
    let is_word = |c: char| c.is_alphanumeric() || c == '_';
    let mut spans = Vec::new();
    let mut word_start: Option<usize> = None;
    for (i, c) in text.char_indices() {
        if is_word(c) {
            word_start.get_or_insert(i);
            continue;
        }
        if let Some(s) = word_start.take() {
            spans.push((s, i));
        }
        if !c.is_whitespace() {
            spans.push((i, i + c.len_utf8()));
        }
    }
    if let Some(s) = word_start {
        spans.push((s, text.len()));
    }
    spans
}

pub trait TokenCounter: Send + Sync {
    /// Recorded in instance metadata.
    fn name(&self) -> &str;

    fn count(&self, text: &str) -> Result<usize, DatasetError>;
}

/// The self-contained default: [`split_tokens`].
#[derive(Debug, Clone, Copy, Default)]
pub struct PunctuationCounter;

impl TokenCounter for PunctuationCounter {
    fn name(&self) -> &str {
        "punct"
    }

    fn count(&self, text: &str) -> Result<usize, DatasetError> {
        Ok(split_tokens(text).len())
    }
}

/// A long-running tokenizer process. Each request is one line holding the
/// text as a JSON string literal (so embedded newlines stay on one line);
/// each response is one line holding a decimal count.
pub struct SubprocessCounter {
    name: String,
    io: Mutex<(Child, ChildStdin, BufReader<ChildStdout>)>,
}

impl SubprocessCounter {
    pub fn spawn(cmd: &str) -> Result<Self, DatasetError> {
        let argv = split_command(cmd);
        let exe = argv
            .first()
            .and_then(find_executable)
            .ok_or_else(|| DatasetError::TokenCounter(format!("`{cmd}` not found")))?;
        let mut child = Command::new(exe)
            .args(&argv[1..])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()?;
        let stdin = child.stdin.take().expect("piped stdin");
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        Ok(SubprocessCounter {
            name: cmd.to_owned(),
            io: Mutex::new((child, stdin, stdout)),
        })
    }
}

impl TokenCounter for SubprocessCounter {
    fn name(&self) -> &str {
        &self.name
    }

    fn count(&self, text: &str) -> Result<usize, DatasetError> {
        let mut guard = self.io.lock().unwrap_or_else(|e| e.into_inner());
        let (_, stdin, stdout) = &mut *guard;
        let request = serde_json::to_string(text).expect("strings always serialize");
        writeln!(stdin, "{request}")?;
        stdin.flush()?;
        let mut reply = String::new();
        if stdout.read_line(&mut reply)? == 0 {
            return Err(DatasetError::TokenCounter(format!("`{}` closed its output", self.name)));
        }
        reply
            .trim()
            .parse()
            .map_err(|_| DatasetError::TokenCounter(format!("bad count reply {:?}", reply.trim())))
    }
}

impl Drop for SubprocessCounter {
    fn drop(&mut self) {
        let guard = self.io.get_mut().unwrap_or_else(|e| e.into_inner());
        let _ = guard.0.kill();
        let _ = guard.0.wait();
    }
}

/// Builds the counter named by a `tokenizer_adapter` setting: `punct` (or
/// empty) is the built-in splitter, anything else a subprocess command.
pub fn counter_from_setting(setting: &str) -> Result<Box<dyn TokenCounter>, DatasetError> {
    match setting.trim() {
        "" | "punct" => Ok(Box::new(PunctuationCounter)),
        cmd => Ok(Box::new(SubprocessCounter::spawn(cmd)?)),
    }
}
