//! Prompt and target encodings.

use super::{DatasetError, DatasetInstance, InstanceMeta, Strategy, Task};
use crate::aspects::{AspectKind, LineAspects};
use crate::quantize::{
    quantize_bc, quantize_lc, quantize_le, quantize_variable, QuantizationScheme, ALL_TOKENS,
    CAT_NEGATIVE_LARGE, CAT_NEGATIVE_REG, CAT_OTHER, CAT_POSITIVE_LARGE, CAT_POSITIVE_REG,
    CAT_UNKNOWN, CAT_ZERO,
};
use crate::trace::{SourceProgram, TestCase};

/// Separates the test input from the program in classify sources.
pub const SEP: &str = "<SEP>";

fn check_aspects(
    program: &SourceProgram,
    aspects: &LineAspects,
    case_id: Option<&str>,
) -> Result<(), DatasetError> {
    let case_ok = case_id.is_none_or(|c| c == aspects.case_id);
    if aspects.program_id != program.program_id
        || !case_ok
        || aspects.exec_count.len() != program.len()
        || aspects.branch_class.len() != program.len()
    {
        return Err(DatasetError::AspectMismatch {
            expected: format!(
                "{}/{} ({} lines)",
                program.program_id,
                case_id.unwrap_or("*"),
                program.len()
            ),
            found: format!(
                "{}/{} ({} lines)",
                aspects.program_id,
                aspects.case_id,
                aspects.exec_count.len()
            ),
        });
    }
    Ok(())
}

/// Token for each line under a line-wise aspect; `None` for unlabeled lines.
/// Returns an empty vector for the variable-state aspect.
pub fn line_tokens(
    aspects: &LineAspects,
    kind: AspectKind,
    scheme: &QuantizationScheme,
) -> Vec<Option<&'static str>> {
    match kind {
        AspectKind::LE => aspects.exec_count.iter().map(|&c| quantize_le(c, scheme)).collect(),
        AspectKind::LC => aspects.covered.iter().map(|&c| quantize_lc(c)).collect(),
        AspectKind::BC => aspects.branch_class.iter().map(|&b| quantize_bc(b)).collect(),
        AspectKind::VS => Vec::new(),
    }
}

/// `// name bucket category` per variable, in first-appearance order.
pub fn variable_comments(aspects: &LineAspects, scheme: &QuantizationScheme) -> Vec<String> {
    aspects
        .terminal_vars
        .iter()
        .map(|v| format!("// {}", quantize_variable(v, scheme).describe()))
        .collect()
}

fn classify_target(aspects: &LineAspects, kind: AspectKind, scheme: &QuantizationScheme) -> String {
    match kind {
        AspectKind::VS => variable_comments(aspects, scheme).join("\n"),
        _ => line_tokens(aspects, kind, scheme)
            .into_iter()
            .map(|t| t.unwrap_or(""))
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

/// Execution-aware pre-training instance: predict the aspect tokens of
/// `program` run on `test`.
pub fn build_exec_pretrain(
    program: &SourceProgram,
    test: &TestCase,
    aspects: &LineAspects,
    kind: AspectKind,
    scheme: &QuantizationScheme,
    strategy: Strategy,
) -> Result<DatasetInstance, DatasetError> {
    check_aspects(program, aspects, Some(&test.case_id))?;
    Ok(DatasetInstance {
        id: format!("{}__{}__{}", program.program_id, test.case_id, kind),
        task: Task::Classify,
        source: format!("{}{}{}{}", Task::Classify.prefix(), test.stdin, SEP, program.text()),
        target: classify_target(aspects, kind, scheme),
        meta: InstanceMeta {
            program_id: program.program_id.clone(),
            case_id: Some(test.case_id.clone()),
            aspect: Some(kind),
            strategy,
            problem_id: program.problem_id.clone(),
            split: program.split,
            token_counter: String::new(),
            fast_program_id: None,
        },
    })
}

/// Identifier shared by every optimize instance (and evaluation record) of
/// one slow/fast pair, whatever the strategy.
pub fn pair_id(slow_id: &str, fast_id: &str) -> String {
    format!("{slow_id}__{fast_id}")
}

/// Optimization instance: slow program in, fast program out. `slow` may be
/// an annotated program.
pub fn build_optimize(
    slow: &SourceProgram,
    fast: &SourceProgram,
    strategy: Strategy,
    aspect: Option<AspectKind>,
) -> Result<DatasetInstance, DatasetError> {
    if slow.problem_id != fast.problem_id {
        return Err(DatasetError::ProblemMismatch {
            slow: slow.problem_id.clone(),
            fast: fast.problem_id.clone(),
        });
    }
    Ok(DatasetInstance {
        id: pair_id(&slow.program_id, &fast.program_id),
        task: Task::Optimize,
        source: format!("{}{}", Task::Optimize.prefix(), slow.text()),
        target: fast.text(),
        meta: InstanceMeta {
            program_id: slow.program_id.clone(),
            case_id: None,
            aspect,
            strategy,
            problem_id: slow.problem_id.clone(),
            split: slow.split,
            token_counter: String::new(),
            fast_program_id: Some(fast.program_id.clone()),
        },
    })
}

/// Embeds aspect tokens in the slow program as comments: a trailing
/// ` // <token>` on each labeled line, or for variable states a block of
/// comment lines after the last line.
pub fn annotate_slow_code(
    slow: &SourceProgram,
    aspects: &LineAspects,
    kind: AspectKind,
    scheme: &QuantizationScheme,
) -> Result<SourceProgram, DatasetError> {
    check_aspects(slow, aspects, None)?;
    let mut out = slow.clone();
    match kind {
        AspectKind::VS => out.lines.extend(variable_comments(aspects, scheme)),
        _ => {
            for (line, tok) in out.lines.iter_mut().zip(line_tokens(aspects, kind, scheme)) {
                if let Some(tok) = tok {
                    line.push_str(" // ");
                    line.push_str(tok);
                }
            }
        }
    }
    Ok(out)
}

fn is_variable_comment(line: &str) -> bool {
    let Some(body) = line.strip_prefix("// ") else {
        return false;
    };
    let parts: Vec<&str> = body.split(' ').collect();
    matches!(parts.as_slice(), [name, bucket, cat]
        if !name.is_empty()
            && matches!(*bucket, "basic_type" | "class")
            && [
                CAT_NEGATIVE_LARGE, CAT_NEGATIVE_REG, CAT_ZERO, CAT_POSITIVE_REG,
                CAT_POSITIVE_LARGE, CAT_OTHER, CAT_UNKNOWN,
            ]
            .contains(cat))
}

/// Inverse of [`annotate_slow_code`] for any aspect.
pub fn strip_annotations(annotated: &SourceProgram) -> SourceProgram {
    let mut out = annotated.clone();
    while out.lines.len() > 1 && out.lines.last().is_some_and(|l| is_variable_comment(l)) {
        out.lines.pop();
    }
    for line in &mut out.lines {
        for tok in ALL_TOKENS {
            if let Some(rest) = line.strip_suffix(tok).and_then(|r| r.strip_suffix(" // ")) {
                line.truncate(rest.len());
                break;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aspects::BranchClass;
    use crate::trace::{Split, VariableSnapshot};

    fn program() -> SourceProgram {
        SourceProgram::new("p1", "A", "int main() {\n  int x = 0;\n  if (x) x = 1;\n}", Split::Train)
    }

    fn aspects() -> LineAspects {
        LineAspects {
            program_id: "p1".into(),
            case_id: "c1".into(),
            exec_count: vec![1, 1, 3, 0],
            covered: vec![true, true, true, false],
            branch_class: vec![
                BranchClass::None,
                BranchClass::None,
                BranchClass::CoveredBranch,
                BranchClass::None,
            ],
            terminal_vars: vec![VariableSnapshot::assigned("x", "int", "0")],
        }
    }

    fn test_case() -> TestCase {
        TestCase {
            case_id: "c1".into(),
            stdin: "5\n".into(),
            expected_stdout: String::new(),
        }
    }

    #[test]
    fn classify_encodings() {
        let s = QuantizationScheme::default();
        let le = build_exec_pretrain(&program(), &test_case(), &aspects(), AspectKind::LE, &s, Strategy::S1)
            .unwrap();
        assert_eq!(le.source, "classify: 5\n<SEP>int main() {\n  int x = 0;\n  if (x) x = 1;\n}");
        assert_eq!(le.target, "<e>\n<e>\n<e+>\n");
        assert_eq!(le.id, "p1__c1__LE");
        let bc = build_exec_pretrain(&program(), &test_case(), &aspects(), AspectKind::BC, &s, Strategy::S1)
            .unwrap();
        assert_eq!(bc.target, "\n\n<BC>\n");
        let vs = build_exec_pretrain(&program(), &test_case(), &aspects(), AspectKind::VS, &s, Strategy::S1)
            .unwrap();
        assert_eq!(vs.target, "// x basic_type ZERO");
    }

    #[test]
    fn never_executed_single_line() {
        let p = SourceProgram::new("q", "A", "int main() {}", Split::Train);
        let a = LineAspects {
            program_id: "q".into(),
            case_id: "c1".into(),
            exec_count: vec![0],
            covered: vec![false],
            branch_class: vec![BranchClass::None],
            terminal_vars: vec![],
        };
        let inst =
            build_exec_pretrain(&p, &test_case(), &a, AspectKind::LC, &QuantizationScheme::default(), Strategy::S1)
                .unwrap();
        assert_eq!(inst.target, "");
    }

    #[test]
    fn mismatched_aspects_rejected() {
        let mut other = test_case();
        other.case_id = "c2".into();
        let s = QuantizationScheme::default();
        assert!(matches!(
            build_exec_pretrain(&program(), &other, &aspects(), AspectKind::LE, &s, Strategy::S1),
            Err(DatasetError::AspectMismatch { .. })
        ));
        let mut a = aspects();
        a.program_id = "zzz".into();
        assert!(annotate_slow_code(&program(), &a, AspectKind::LE, &s).is_err());
    }

    #[test]
    fn optimize_encoding() {
        let slow = program();
        let fast = SourceProgram::new("p2", "A", "int main() {}", Split::Train);
        let inst = build_optimize(&slow, &fast, Strategy::BL, None).unwrap();
        assert!(inst.source.starts_with("optimize: int main() {\n"));
        assert_eq!(inst.target, "int main() {}");
        assert_eq!(inst.id, "p1__p2");
        assert!(build_optimize(&slow, &slow, Strategy::BL, None).is_ok());
        let other = SourceProgram::new("p3", "B", "x", Split::Train);
        assert!(matches!(
            build_optimize(&slow, &other, Strategy::BL, None),
            Err(DatasetError::ProblemMismatch { .. })
        ));
    }

    #[test]
    fn annotate_and_strip() {
        let s = QuantizationScheme::default();
        for kind in AspectKind::ALL {
            let ann = annotate_slow_code(&program(), &aspects(), kind, &s).unwrap();
            assert_eq!(strip_annotations(&ann), program(), "{kind}");
        }
        let le = annotate_slow_code(&program(), &aspects(), AspectKind::LE, &s).unwrap();
        assert_eq!(le.lines[2], "  if (x) x = 1; // <e+>");
        assert_eq!(le.lines[3], "}");
        let vs = annotate_slow_code(&program(), &aspects(), AspectKind::VS, &s).unwrap();
        assert_eq!(vs.lines.last().unwrap(), "// x basic_type ZERO");
        assert_eq!(vs.len(), program().len() + 1);
    }

    #[test]
    fn empty_aspects_leave_program_unchanged() {
        let mut a = aspects();
        a.exec_count = vec![0; 4];
        a.covered = vec![false; 4];
        a.branch_class = vec![BranchClass::None; 4];
        a.terminal_vars.clear();
        for kind in AspectKind::ALL {
            let ann = annotate_slow_code(&program(), &a, kind, &QuantizationScheme::default()).unwrap();
            assert_eq!(ann, program());
        }
    }
}
