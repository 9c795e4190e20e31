//! Program canonicalization: comment removal followed by an optional
//! external formatter (e.g. `clang-format --style=LLVM`).

use std::process::Command;
use std::time::Duration;

use super::DatasetError;
use crate::process::{find_executable, run_bounded, split_command, Termination};
use crate::trace::SourceProgram;

/// An external formatter reading a program on stdin and writing the
/// formatted program on stdout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formatter {
    cmd: String,
}

impl Formatter {
    pub fn new(cmd: impl Into<String>) -> Self {
        Formatter { cmd: cmd.into() }
    }

    pub fn command(&self) -> &str {
        &self.cmd
    }

    pub fn check_available(&self) -> Result<(), DatasetError> {
        match split_command(&self.cmd).first() {
            Some(prog) if find_executable(prog).is_some() => Ok(()),
            _ => Err(DatasetError::FormatterUnavailable(self.cmd.clone())),
        }
    }

    pub fn format(&self, text: &str) -> Result<String, DatasetError> {
        self.check_available()?;
        let argv = split_command(&self.cmd);
        let dir = tempfile::tempdir()?;
        let input = dir.path().join("input.cpp");
        std::fs::write(&input, text)?;
        let mut cmd = Command::new(&argv[0]);
        cmd.args(&argv[1..]);
        let done = run_bounded(cmd, Some(&input), Duration::from_secs(60))?;
        match done.termination {
            Termination::Exited(0) => String::from_utf8(done.stdout)
                .map_err(|_| DatasetError::FormatterFailed("output is not UTF-8".into())),
            other => Err(DatasetError::FormatterFailed(format!(
                "{other:?}: {}",
                String::from_utf8_lossy(&done.stderr).trim()
            ))),
        }
    }
}

/// Removes `//` and `/* */` comments while leaving string, character and raw
/// string literals intact. A block comment becomes one space, as in the
/// preprocessor. Lines left blank by a removed comment are dropped and
/// trailing whitespace is trimmed.
pub fn strip_comments(text: &str) -> String {
    let chars: Vec<char> = text.chars().collect();
    let mut out = String::with_capacity(text.len());
    // Per output line: did a comment touch it?
    let mut touched = false;
    let mut lines: Vec<(String, bool)> = Vec::new();
    let mut i = 0;
    let mut number_word = false;
    let is_ident = |c: char| c.is_alphanumeric() || c == '_';

    let flush = |out: &mut String, touched: &mut bool, lines: &mut Vec<(String, bool)>| {
        lines.push((std::mem::take(out), *touched));
        *touched = false;
    };

    while i < chars.len() {
        let c = chars[i];
        let next = chars.get(i + 1).copied();
        let prev = i.checked_sub(1).map(|p| chars[p]);
        match (c, next) {
            ('\n', _) => {
                flush(&mut out, &mut touched, &mut lines);
                i += 1;
            }
            ('/', Some('/')) => {
                touched = true;
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
            }
            ('/', Some('*')) => {
                touched = true;
                i += 2;
                while i < chars.len() && !(chars[i] == '*' && chars.get(i + 1) == Some(&'/')) {
                    if chars[i] == '\n' {
                        flush(&mut out, &mut touched, &mut lines);
                        touched = true;
                    }
                    i += 1;
                }
                i = (i + 2).min(chars.len());
                out.push(' ');
            }
            ('"', _) if prev == Some('R') && raw_prefix_ok(&chars, i) => {
                let end = raw_string_end(&chars, i);
                for &ch in &chars[i..end] {
                    if ch == '\n' {
                        flush(&mut out, &mut touched, &mut lines);
                    } else {
                        out.push(ch);
                    }
                }
                i = end;
            }
            ('\'', _) if number_word && prev.is_some_and(|p| p.is_ascii_alphanumeric()) => {
                out.push(c);
                i += 1;
            }
            ('"', _) | ('\'', _) => {
                out.push(c);
                i += 1;
                while i < chars.len() && chars[i] != c && chars[i] != '\n' {
                    if chars[i] == '\\' && i + 1 < chars.len() {
                        out.push(chars[i]);
                        i += 1;
                    }
                    out.push(chars[i]);
                    i += 1;
                }
                if i < chars.len() && chars[i] == c {
                    out.push(c);
                    i += 1;
                }
            }
            _ => {
                if is_ident(c) && !prev.is_some_and(is_ident) {
                    number_word = c.is_ascii_digit();
                }
                out.push(c);
                i += 1;
            }
        }
    }
    flush(&mut out, &mut touched, &mut lines);

    let ends_with_newline = text.ends_with('\n');
    let mut kept: Vec<String> = lines
        .into_iter()
        .filter(|(l, touched)| !(*touched && l.trim().is_empty()))
        .map(|(l, _)| l.trim_end().to_owned())
        .collect();
    if ends_with_newline && kept.last().is_some_and(|l| l.is_empty()) {
        kept.pop();
    }
    let mut joined = kept.join("\n");
    if ends_with_newline {
        joined.push('\n');
    }
    joined
}

/// `R"` begins a raw string only when `R` starts the literal prefix
/// (`R`, `LR`, `uR`, `UR`, `u8R`).
fn raw_prefix_ok(chars: &[char], quote: usize) -> bool {
    let mut start = quote - 1;
    while start > 0 && (chars[start - 1].is_alphanumeric() || chars[start - 1] == '_') {
        start -= 1;
    }
    let prefix: String = chars[start..quote].iter().collect();
    matches!(prefix.as_str(), "R" | "LR" | "uR" | "UR" | "u8R")
}

/// Index one past the closing `)delim"` of a raw string starting at `quote`.
fn raw_string_end(chars: &[char], quote: usize) -> usize {
    let mut j = quote + 1;
    while j < chars.len() && chars[j] != '(' {
        j += 1;
    }
    let delim: Vec<char> = chars[quote + 1..j.min(chars.len())].to_vec();
    let mut k = j + 1;
    while k < chars.len() {
        if chars[k] == ')'
            && chars[k + 1..].starts_with(&delim)
            && chars.get(k + 1 + delim.len()) == Some(&'"')
        {
            return k + delim.len() + 2;
        }
        k += 1;
    }
    chars.len()
}

/// Removes comments and, when a formatter is configured, normalizes layout.
pub fn canonicalize(
    program: &SourceProgram,
    formatter: Option<&Formatter>,
) -> Result<SourceProgram, DatasetError> {
    let mut text = strip_comments(&program.text());
    if let Some(f) = formatter {
        text = f.format(&text)?;
    }
    Ok(SourceProgram::new(
        program.program_id.clone(),
        program.problem_id.clone(),
        &text,
        program.split,
    ))
}
