//! Synthetic inputs for the criterion benchmarks.

pub use execaware::trace::{ExecutionTrace, SourceProgram, Split, TraceStatus, TraceStep, VariableSnapshot};

/// A program of `loops` nested-free counting loops, `4 * loops + 3` lines.
pub fn program(loops: usize) -> SourceProgram {
    let mut text = String::from("#include <cstdio>\nint main() {\n");
    for k in 0..loops {
        text.push_str(&format!(
            "  long long s{k} = 0;\n  for (int i = 0; i < {n}; i++)\n    s{k} += i % 7;\n  printf(\"%lld\\n\", s{k});\n",
            n = 10 + k
        ));
    }
    text.push('}');
    SourceProgram::new("bench", "B", &text, Split::Train)
}

/// The trace a debugger would record for [`program`]: every loop header,
/// body and print line, with the loop's accumulator and index in scope.
pub fn trace(loops: usize) -> ExecutionTrace {
    let mut steps = vec![TraceStep { line_no: 2, variables: Vec::new() }];
    for k in 0..loops {
        let base = 3 + 4 * k;
        let n = 10 + k;
        let acc = |v: i64| VariableSnapshot::assigned(format!("s{k}"), "long long", v.to_string());
        steps.push(TraceStep { line_no: base, variables: vec![VariableSnapshot::unassigned(format!("s{k}"), "long long")] });
        let mut s = 0i64;
        for i in 0..=n {
            let idx = VariableSnapshot::assigned("i", "int", i.to_string());
            steps.push(TraceStep { line_no: base + 1, variables: vec![acc(s), idx.clone()] });
            if i < n {
                steps.push(TraceStep { line_no: base + 2, variables: vec![acc(s), idx] });
                s += (i % 7) as i64;
            }
        }
        steps.push(TraceStep { line_no: base + 3, variables: vec![acc(s)] });
    }
    steps.push(TraceStep { line_no: 3 + 4 * loops, variables: Vec::new() });
    ExecutionTrace {
        program_id: "bench".into(),
        case_id: "1".into(),
        steps,
        status: TraceStatus::Complete,
        wall_time: 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use execaware::aspects::LineAspects;

    #[test]
    fn trace_fits_program() {
        let p = program(3);
        let t = trace(3);
        assert_eq!(p.len(), 15);
        let a = LineAspects::derive(&p, &t).unwrap();
        assert_eq!(a.exec_count[3], 11);
        assert_eq!(a.exec_count[4], 10);
    }
}
