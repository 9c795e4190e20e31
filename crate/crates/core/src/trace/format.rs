//! Canonical trace document format.
//!
//! ```text
//! trace <program_id> <case_id> <status> <wall_time>
//! step <line_no>
//! var <name>\t<type>\t<value>
//! ```
//!
//! One record per LF-terminated line. `wall_time` is written with exactly
//! three decimals. A value of `?` marks an unassigned variable; a literal
//! `?` value is written `\?`. Inside var fields `\\`, `\t`, `\n` and `\r`
//! are escaped. Only documents in this canonical form are accepted, which
//! makes parse/serialize a byte-exact round trip.

use std::fmt::Write as _;

use super::{
    ExecutionTrace, SourceProgram, TraceError, TraceStatus, TraceStep, VarValue, VariableSnapshot,
};

const UNASSIGNED: &str = "?";

pub fn serialize_trace(trace: &ExecutionTrace) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "trace {} {} {} {:.3}",
        trace.program_id, trace.case_id, trace.status, trace.wall_time
    );
    for step in &trace.steps {
        let _ = writeln!(out, "step {}", step.line_no);
        for var in &step.variables {
            out.push_str("var ");
            escape_into(&mut out, &var.name);
            out.push('\t');
            escape_into(&mut out, &var.declared_type);
            out.push('\t');
            match &var.value {
                VarValue::Unassigned => out.push_str(UNASSIGNED),
                VarValue::Value(v) if v == UNASSIGNED => out.push_str("\\?"),
                VarValue::Value(v) => escape_into(&mut out, v),
            }
            out.push('\n');
        }
    }
    out
}

fn escape_into(out: &mut String, field: &str) {
    for c in field.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
}

fn unescape(field: &str, line: usize) -> Result<String, TraceError> {
    let mut out = String::with_capacity(field.len());
    let mut chars = field.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => {
                return Err(TraceError::malformed(
                    line,
                    format!("unknown escape `\\{other}`"),
                ))
            }
            None => return Err(TraceError::malformed(line, "dangling escape")),
        }
    }
    Ok(out)
}

fn parse_id(tok: Option<&str>, what: &str, line: usize) -> Result<String, TraceError> {
    match tok {
        Some(t) if !t.is_empty() => Ok(t.to_owned()),
        _ => Err(TraceError::malformed(line, format!("missing {what}"))),
    }
}

fn parse_wall_time(tok: &str, line: usize) -> Result<f64, TraceError> {
    let canonical = tok
        .split_once('.')
        .map(|(int, frac)| {
            !int.is_empty()
                && int.bytes().all(|b| b.is_ascii_digit())
                && (int == "0" || !int.starts_with('0'))
                && frac.len() == 3
                && frac.bytes().all(|b| b.is_ascii_digit())
        })
        .unwrap_or(false);
    if !canonical {
        return Err(TraceError::malformed(
            line,
            format!("wall_time `{tok}` is not a decimal with three fractional digits"),
        ));
    }
    tok.parse()
        .map_err(|_| TraceError::malformed(line, "wall_time is not a number"))
}

fn parse_line_no(tok: &str, line: usize) -> Result<usize, TraceError> {
    let valid = !tok.is_empty() && tok.bytes().all(|b| b.is_ascii_digit()) && !tok.starts_with('0');
    if !valid {
        return Err(TraceError::malformed(line, format!("bad line number `{tok}`")));
    }
    tok.parse()
        .map_err(|_| TraceError::malformed(line, format!("bad line number `{tok}`")))
}

fn parse_var(rest: &str, line: usize) -> Result<VariableSnapshot, TraceError> {
    let mut fields = rest.split('\t');
    let (Some(name), Some(ty), Some(value), None) =
        (fields.next(), fields.next(), fields.next(), fields.next())
    else {
        return Err(TraceError::malformed(
            line,
            "var record needs exactly three tab-separated fields",
        ));
    };
    let name = unescape(name, line)?;
    if name.is_empty() {
        return Err(TraceError::malformed(line, "empty variable name"));
    }
    let value = match value {
        UNASSIGNED => VarValue::Unassigned,
        "\\?" => VarValue::Value(UNASSIGNED.to_owned()),
        v => VarValue::Value(unescape(v, line)?),
    };
    Ok(VariableSnapshot {
        name,
        declared_type: unescape(ty, line)?,
        value,
    })
}

/// Parses a canonical trace document.
///
/// Line numbers are only checked for being positive; use
/// [`parse_trace_for`] to validate them against the traced program.
pub fn parse_trace(document: &str) -> Result<ExecutionTrace, TraceError> {
    if document.is_empty() {
        return Err(TraceError::malformed(1, "empty document"));
    }
    if !document.ends_with('\n') {
        return Err(TraceError::malformed(
            document.lines().count(),
            "document is not LF-terminated",
        ));
    }
    let mut lines = document[..document.len() - 1].split('\n').enumerate();

    let (_, header) = lines.next().expect("non-empty document");
    let mut toks = header.split(' ');
    if toks.next() != Some("trace") {
        return Err(TraceError::malformed(1, "expected `trace` header"));
    }
    let program_id = parse_id(toks.next(), "program_id", 1)?;
    let case_id = parse_id(toks.next(), "case_id", 1)?;
    let status: TraceStatus = toks
        .next()
        .ok_or_else(|| TraceError::malformed(1, "missing status"))?
        .parse()
        .map_err(|e: String| TraceError::malformed(1, e))?;
    let wall_time = parse_wall_time(
        toks.next()
            .ok_or_else(|| TraceError::malformed(1, "missing wall_time"))?,
        1,
    )?;
    if toks.next().is_some() {
        return Err(TraceError::malformed(1, "trailing fields in header"));
    }

    let mut steps: Vec<TraceStep> = Vec::new();
    for (idx, rec) in lines {
        let line = idx + 1;
        if let Some(rest) = rec.strip_prefix("step ") {
            steps.push(TraceStep {
                line_no: parse_line_no(rest, line)?,
                variables: Vec::new(),
            });
        } else if let Some(rest) = rec.strip_prefix("var ") {
            let var = parse_var(rest, line)?;
            steps
                .last_mut()
                .ok_or_else(|| TraceError::malformed(line, "var record before any step"))?
                .variables
                .push(var);
        } else {
            return Err(TraceError::malformed(line, format!("unknown record `{rec}`")));
        }
    }

    if status == TraceStatus::Complete && steps.is_empty() {
        return Err(TraceError::malformed(1, "complete trace without steps"));
    }

    Ok(ExecutionTrace {
        program_id,
        case_id,
        steps,
        status,
        wall_time,
    })
}

/// Parses a document and checks it against the program it claims to trace.
pub fn parse_trace_for(
    document: &str,
    program: &SourceProgram,
) -> Result<ExecutionTrace, TraceError> {
    let trace = parse_trace(document)?;
    if trace.program_id != program.program_id {
        return Err(TraceError::malformed(
            1,
            format!(
                "trace is for program `{}`, expected `{}`",
                trace.program_id, program.program_id
            ),
        ));
    }
    if let Some(bad) = trace.steps.iter().find(|s| s.line_no > program.len()) {
        return Err(TraceError::malformed(
            0,
            format!(
                "step references line {} of a {}-line program",
                bad.line_no,
                program.len()
            ),
        ));
    }
    Ok(trace)
}
