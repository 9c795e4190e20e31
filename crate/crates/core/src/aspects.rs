//! The four execution aspects: line executions, line coverage, branch
//! coverage and variable states.
//!
//! Per-line maps are dense `Vec`s indexed by `line_no - 1`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::{final_states, ExecutionTrace, SourceProgram, TraceError, VariableSnapshot};

#[derive(Debug, Error)]
pub enum AspectError {
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error("unbalanced braces at line {0}")]
    UnbalancedBraces(usize),
    #[error("no line-count maps to merge")]
    EmptyInput,
    #[error("line-count maps disagree on program length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Which aspect an instance or annotation carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AspectKind {
    LE,
    LC,
    BC,
    VS,
}

impl AspectKind {
    pub const ALL: [AspectKind; 4] = [AspectKind::LE, AspectKind::LC, AspectKind::BC, AspectKind::VS];

    pub fn as_str(self) -> &'static str {
        match self {
            AspectKind::LE => "LE",
            AspectKind::LC => "LC",
            AspectKind::BC => "BC",
            AspectKind::VS => "VS",
        }
    }
}

impl std::fmt::Display for AspectKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AspectKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "LE" => Ok(AspectKind::LE),
            "LC" => Ok(AspectKind::LC),
            "BC" => Ok(AspectKind::BC),
            "VS" => Ok(AspectKind::VS),
            _ => Err(format!("unknown aspect `{s}` (expected LE, LC, BC or VS)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchMembership {
    BranchRegion,
    NonBranch,
    BraceOnly,
}

/// Static per-line branch membership of a program.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchMap(pub Vec<BranchMembership>);

impl BranchMap {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, line_no: usize) -> Option<BranchMembership> {
        line_no.checked_sub(1).and_then(|i| self.0.get(i)).copied()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchClass {
    CoveredBranch,
    UncoveredBranch,
    None,
}

/// All four aspects for one program/test-case pairing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineAspects {
    pub program_id: String,
    pub case_id: String,
    pub exec_count: Vec<u64>,
    pub covered: Vec<bool>,
    pub branch_class: Vec<BranchClass>,
    pub terminal_vars: Vec<VariableSnapshot>,
}

impl LineAspects {
    /// Derives every aspect of `trace` over `program`.
    pub fn derive(program: &SourceProgram, trace: &ExecutionTrace) -> Result<Self, AspectError> {
        let mut exec_count = count_line_executions(trace)?;
        if exec_count.len() > program.len() {
            return Err(TraceError::MalformedTrace {
                line: 0,
                reason: format!(
                    "trace references line {} of a {}-line program",
                    exec_count.len(),
                    program.len()
                ),
            }
            .into());
        }
        exec_count.resize(program.len(), 0);
        let covered: Vec<bool> = exec_count.iter().map(|&c| c >= 1).collect();
        let bmap = build_branch_map(program)?;
        let covered_set = covered_lines(&covered);
        Ok(LineAspects {
            program_id: program.program_id.clone(),
            case_id: trace.case_id.clone(),
            branch_class: branch_coverage(&bmap, &covered_set),
            exec_count,
            covered,
            terminal_vars: final_states(trace)?,
        })
    }

    /// Replaces line executions by `counts` (e.g. merged across traces),
    /// keeping the other aspects consistent with them.
    pub fn with_exec_counts(
        program: &SourceProgram,
        counts: Vec<u64>,
        case_id: impl Into<String>,
    ) -> Result<Self, AspectError> {
        if counts.len() != program.len() {
            return Err(AspectError::LengthMismatch(counts.len(), program.len()));
        }
        let covered: Vec<bool> = counts.iter().map(|&c| c >= 1).collect();
        let bmap = build_branch_map(program)?;
        Ok(LineAspects {
            program_id: program.program_id.clone(),
            case_id: case_id.into(),
            branch_class: branch_coverage(&bmap, &covered_lines(&covered)),
            exec_count: counts,
            covered,
            terminal_vars: Vec::new(),
        })
    }
}

fn covered_lines(covered: &[bool]) -> BTreeSet<usize> {
    covered
        .iter()
        .enumerate()
        .filter(|(_, &c)| c)
        .map(|(i, _)| i + 1)
        .collect()
}

/// Number of stops on each line. The returned vector extends to the highest
/// line that appears in the trace; callers pad it to the program length.
pub fn count_line_executions(trace: &ExecutionTrace) -> Result<Vec<u64>, TraceError> {
    trace.require_complete()?;
    let max_line = trace.steps.iter().map(|s| s.line_no).max().unwrap_or(0);
    let mut counts = vec![0u64; max_line];
    for step in &trace.steps {
        counts[step.line_no - 1] += 1;
    }
    Ok(counts)
}

pub fn line_coverage(trace: &ExecutionTrace) -> Result<BTreeSet<usize>, TraceError> {
    trace.require_complete()?;
    Ok(trace.steps.iter().map(|s| s.line_no).collect())
}

/// Pointwise maximum of several per-line count maps for the same program.
pub fn merge_le_across_traces(counts: &[Vec<u64>]) -> Result<Vec<u64>, AspectError> {
    let (first, rest) = counts.split_first().ok_or(AspectError::EmptyInput)?;
    let mut merged = first.clone();
    for c in rest {
        if c.len() != merged.len() {
            return Err(AspectError::LengthMismatch(merged.len(), c.len()));
        }
        for (m, &v) in merged.iter_mut().zip(c) {
            *m = (*m).max(v);
        }
    }
    Ok(merged)
}

pub fn branch_coverage(bmap: &BranchMap, covered: &BTreeSet<usize>) -> Vec<BranchClass> {
    bmap.0
        .iter()
        .enumerate()
        .map(|(i, m)| match m {
            BranchMembership::BranchRegion if covered.contains(&(i + 1)) => {
                BranchClass::CoveredBranch
            }
            BranchMembership::BranchRegion => BranchClass::UncoveredBranch,
            _ => BranchClass::None,
        })
        .collect()
}

const BRANCH_KEYWORDS: &[&str] = &[
    "if", "else", "for", "while", "do", "switch", "case", "default",
];

/// Per-line lexical facts used by the branch scanner.
#[derive(Debug, Default, Clone)]
struct LineShape {
    /// Code with comments removed and literal contents blanked.
    code: String,
    depth_before: i64,
    depth_after: i64,
    min_depth: i64,
}

impl LineShape {
    fn trimmed(&self) -> &str {
        self.code.trim()
    }

    fn is_brace_only(&self) -> bool {
        self.code.chars().all(|c| c == '{' || c == '}' || c.is_whitespace())
    }

    fn is_header(&self) -> bool {
        let t = self.trimmed().trim_start_matches(|c: char| c == '}' || c.is_whitespace());
        let word: String = t
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
            .collect();
        BRANCH_KEYWORDS.contains(&word.as_str())
    }

    fn ends_statement(&self) -> bool {
        let t = self.trimmed();
        t.ends_with(';') || t.ends_with('}') || t.ends_with(':')
    }
}

/// Splits the program into per-line code shapes, tracking brace depth across
/// lines and skipping comments, string and character literals.
fn line_shapes(program: &SourceProgram) -> Result<Vec<LineShape>, AspectError> {
    let mut shapes = Vec::with_capacity(program.len());
    let mut depth = 0i64;
    let mut in_block_comment = false;
    for (idx, line) in program.lines.iter().enumerate() {
        let mut shape = LineShape {
            depth_before: depth,
            min_depth: depth,
            ..Default::default()
        };
        let bytes: Vec<char> = line.chars().collect();
        let mut i = 0;
        let preprocessor = !in_block_comment && line.trim_start().starts_with('#');
        while i < bytes.len() {
            let c = bytes[i];
            let next = bytes.get(i + 1).copied();
            if in_block_comment {
                if c == '*' && next == Some('/') {
                    in_block_comment = false;
                    i += 2;
                } else {
                    i += 1;
                }
                continue;
            }
            match (c, next) {
                ('/', Some('/')) => break,
                ('/', Some('*')) => {
                    in_block_comment = true;
                    i += 2;
                    continue;
                }
                ('"', _) | ('\'', _) if !preprocessor => {
                    shape.code.push(c);
                    i += 1;
                    while i < bytes.len() && bytes[i] != c {
                        if bytes[i] == '\\' {
                            i += 1;
                        }
                        i += 1;
                    }
                    shape.code.push(c);
                    i += 1;
                    continue;
                }
                ('{', _) if !preprocessor => {
                    depth += 1;
                }
                ('}', _) if !preprocessor => {
                    depth -= 1;
                    if depth < 0 {
                        return Err(AspectError::UnbalancedBraces(idx + 1));
                    }
                    shape.min_depth = shape.min_depth.min(depth);
                }
                _ => {}
            }
            shape.code.push(c);
            i += 1;
        }
        shape.depth_after = depth;
        shapes.push(shape);
    }
    if depth != 0 {
        return Err(AspectError::UnbalancedBraces(program.len()));
    }
    Ok(shapes)
}

/// Last line (0-based) of the construct headed by line `h`.
fn construct_end(shapes: &[LineShape], h: usize) -> usize {
    let header = &shapes[h];
    if header.depth_after > header.min_depth {
        // Opens a block that stays open past this line.
        return block_end(shapes, h, header.min_depth);
    }
    if header.ends_statement() {
        return h;
    }
    // Brace-less body on the following lines.
    let Some(next) = (h + 1..shapes.len()).find(|&j| !shapes[j].trimmed().is_empty()) else {
        return h;
    };
    let body = &shapes[next];
    if body.trimmed().starts_with('{') {
        block_end(shapes, next, body.depth_before)
    } else if body.is_header() {
        construct_end(shapes, next)
    } else {
        (next..shapes.len())
            .find(|&j| shapes[j].ends_statement())
            .unwrap_or(shapes.len() - 1)
    }
}

/// First line after `open` whose brace depth drops back to `base`.
fn block_end(shapes: &[LineShape], open: usize, base: i64) -> usize {
    (open + 1..shapes.len())
        .find(|&j| shapes[j].min_depth <= base)
        .unwrap_or(shapes.len() - 1)
}

/// Classifies every line as part of a branch construct, outside any branch,
/// or brace-only (including blank lines).
///
/// Headers of `if`/`else`/`for`/`while`/`do`/`switch`/`case`/`default` and
/// all lines lexically inside their bodies are branch regions. Works on one
/// statement per line, as produced by the canonical formatter.
pub fn build_branch_map(program: &SourceProgram) -> Result<BranchMap, AspectError> {
    let shapes = line_shapes(program)?;
    let mut in_branch = vec![false; shapes.len()];
    for h in 0..shapes.len() {
        if shapes[h].is_header() {
            let end = construct_end(&shapes, h);
            in_branch[h..=end].iter_mut().for_each(|b| *b = true);
        }
    }
    Ok(BranchMap(
        shapes
            .iter()
            .zip(in_branch)
            .map(|(shape, branch)| {
                if shape.is_brace_only() {
                    BranchMembership::BraceOnly
                } else if branch {
                    BranchMembership::BranchRegion
                } else {
                    BranchMembership::NonBranch
                }
            })
            .collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::{Split, TraceStatus, TraceStep};
    use proptest::prelude::*;
    use BranchMembership::*;

    fn program(text: &str) -> SourceProgram {
        SourceProgram::new("p", "q", text, Split::Train)
    }

    fn trace_of(lines: &[usize]) -> ExecutionTrace {
        ExecutionTrace {
            program_id: "p".into(),
            case_id: "c".into(),
            steps: lines
                .iter()
                .map(|&line_no| TraceStep {
                    line_no,
                    variables: vec![],
                })
                .collect(),
            status: TraceStatus::Complete,
            wall_time: 0.0,
        }
    }

    #[test]
    fn loop_body_counted_per_iteration() {
        let mut lines = vec![1];
        lines.extend(std::iter::repeat(2).take(7));
        lines.push(3);
        let counts = count_line_executions(&trace_of(&lines)).unwrap();
        assert_eq!(counts, vec![1, 7, 1]);
    }

    #[test]
    fn untaken_else_is_not_covered() {
        let p = program("int main() {\nint x = 1;\nif (x)\nx = 2;\nelse\nx = 3;\nreturn 0;\n}");
        let t = trace_of(&[1, 2, 3, 4, 7, 8]);
        let cov = line_coverage(&t).unwrap();
        assert!(!cov.contains(&6));
        let aspects = LineAspects::derive(&p, &t).unwrap();
        assert_eq!(aspects.branch_class[5], BranchClass::UncoveredBranch);
        assert_eq!(aspects.branch_class[4], BranchClass::UncoveredBranch);
        assert_eq!(aspects.branch_class[3], BranchClass::CoveredBranch);
        assert_eq!(aspects.branch_class[6], BranchClass::None);
    }

    #[test]
    fn straight_line_program_has_no_branches() {
        let p = program("#include <cstdio>\nint main() {\n  int a = 1;\n  printf(\"%d\", a);\n  return 0;\n}\n");
        let map = build_branch_map(&p).unwrap();
        assert_eq!(map.0, vec![NonBranch, NonBranch, NonBranch, NonBranch, NonBranch, BraceOnly]);
    }

    #[test]
    fn nested_if_inside_for() {
        let p = program(
            "int main() {\n\
             int s = 0;\n\
             for (int i = 0; i < 3; i++) {\n\
             if (i % 2) {\n\
             s += i;\n\
             } else {\n\
             s -= 1;\n\
             }\n\
             }\n\
             return s;\n\
             }",
        );
        let map = build_branch_map(&p).unwrap();
        assert_eq!(
            map.0,
            vec![
                NonBranch, NonBranch, BranchRegion, BranchRegion, BranchRegion, BranchRegion,
                BranchRegion, BraceOnly, BraceOnly, NonBranch, BraceOnly
            ]
        );
    }

    #[test]
    fn braceless_bodies_and_do_while() {
        let p = program(
            "int main() {\n\
             int n = 0;\n\
             while (n < 3)\n\
             n++;\n\
             do {\n\
             n--;\n\
             } while (n > 0);\n\
             if (n)\n\
             for (;;)\n\
             break;\n\
             return n;\n\
             }",
        );
        let map = build_branch_map(&p).unwrap();
        assert_eq!(
            map.0,
            vec![
                NonBranch, NonBranch, BranchRegion, BranchRegion, BranchRegion, BranchRegion,
                BranchRegion, BranchRegion, BranchRegion, BranchRegion, NonBranch, BraceOnly
            ]
        );
    }

    #[test]
    fn switch_cases_are_branch_regions() {
        let p = program(
            "int main() {\nint k = 2;\nswitch (k) {\ncase 1:\nk = 0;\nbreak;\ndefault:\nk = 1;\n}\nreturn k;\n}",
        );
        let map = build_branch_map(&p).unwrap();
        assert_eq!(&map.0[2..8], &[BranchRegion; 6]);
        assert_eq!(map.0[8], BraceOnly);
        assert_eq!(map.0[9], NonBranch);
    }

    #[test]
    fn braces_in_literals_and_comments_are_ignored() {
        let p = program("int main() {\nchar c = '{';\nconst char* s = \"}}\"; // }\n/* { */\nreturn 0;\n}");
        assert!(build_branch_map(&p).is_ok());
        // `if` inside a string is not a header.
        let p = program("int main() {\nputs(\"if (x)\");\n}");
        assert_eq!(build_branch_map(&p).unwrap().0[1], NonBranch);
    }

    #[test]
    fn unbalanced_braces_rejected() {
        assert!(matches!(
            build_branch_map(&program("int main() {\nreturn 0;\n")),
            Err(AspectError::UnbalancedBraces(_))
        ));
        assert!(matches!(
            build_branch_map(&program("}\n")),
            Err(AspectError::UnbalancedBraces(1))
        ));
    }

    #[test]
    fn branch_coverage_extremes() {
        let p = program("int main() {\nif (1) {\nint a;\n}\n}");
        let map = build_branch_map(&p).unwrap();
        let none = branch_coverage(&map, &BTreeSet::new());
        assert_eq!(none[1], BranchClass::UncoveredBranch);
        assert_eq!(none[2], BranchClass::UncoveredBranch);
        let all: BTreeSet<usize> = (1..=p.len()).collect();
        let full = branch_coverage(&map, &all);
        assert!(!full.contains(&BranchClass::UncoveredBranch));
    }

    #[test]
    fn merge_takes_pointwise_max() {
        assert_eq!(merge_le_across_traces(&[vec![2], vec![5]]).unwrap(), vec![5]);
        assert_eq!(merge_le_across_traces(&[vec![1, 2, 3]]).unwrap(), vec![1, 2, 3]);
        assert!(matches!(merge_le_across_traces(&[]), Err(AspectError::EmptyInput)));
    }

    #[test]
    fn merge_matches_exhaustive_scan() {
        let maps = vec![vec![9, 0, 0, 1], vec![0, 4, 0, 1], vec![0, 0, 30, 2]];
        let merged = merge_le_across_traces(&maps).unwrap();
        for line in 0..4 {
            let mut best = 0;
            for m in &maps {
                if m[line] > best {
                    best = m[line];
                }
            }
            assert_eq!(merged[line], best);
        }
    }

    #[test]
    fn incomplete_trace_rejected() {
        let mut t = trace_of(&[1]);
        t.status = TraceStatus::Crashed;
        assert!(count_line_executions(&t).is_err());
        assert!(line_coverage(&t).is_err());
    }

    fn count_map() -> impl Strategy<Value = Vec<u64>> {
        prop::collection::vec(0u64..50, 6)
    }

    proptest! {
        #[test]
        fn counts_sum_to_step_total(lines in prop::collection::vec(1usize..20, 1..200)) {
            let t = trace_of(&lines);
            let counts = count_line_executions(&t).unwrap();
            prop_assert_eq!(counts.iter().sum::<u64>() as usize, lines.len());
            let cov = line_coverage(&t).unwrap();
            let from_counts: BTreeSet<usize> = counts.iter().enumerate()
                .filter(|(_, &c)| c >= 1).map(|(i, _)| i + 1).collect();
            prop_assert_eq!(cov, from_counts);
        }

        #[test]
        fn merge_is_commutative_associative_idempotent(a in count_map(), b in count_map(), c in count_map()) {
            let m = |x: &[Vec<u64>]| merge_le_across_traces(x).unwrap();
            prop_assert_eq!(m(&[a.clone(), b.clone()]), m(&[b.clone(), a.clone()]));
            prop_assert_eq!(
                m(&[m(&[a.clone(), b.clone()]), c.clone()]),
                m(&[a.clone(), m(&[b.clone(), c.clone()])])
            );
            prop_assert_eq!(m(&[a.clone(), a.clone()]), a);
        }

        #[test]
        fn branch_class_none_exactly_off_region(covered in prop::collection::btree_set(1usize..12, 0..12)) {
            let p = program(
                "int main() {\nint s = 0;\nfor (int i = 0; i < 3; i++) {\nif (i) s++;\nelse s--;\n}\nwhile (s > 0)\ns--;\nreturn s;\n}\n",
            );
            let map = build_branch_map(&p).unwrap();
            let classes = branch_coverage(&map, &covered);
            for (m, c) in map.0.iter().zip(&classes) {
                prop_assert_eq!(*m != BranchRegion, *c == BranchClass::None);
            }
        }
    }
}
