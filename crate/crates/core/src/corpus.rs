//! On-disk corpus of problems, programs, test cases and slow/fast pairs.
//!
//! ```text
//! <root>/problems/<problem_id>/problem.toml      split = "train" | "validation" | "test"
//! <root>/problems/<problem_id>/src/<program_id>.cpp
//! <root>/problems/<problem_id>/tests/<case_id>.in
//! <root>/problems/<problem_id>/tests/<case_id>.out
//! <root>/pairs.jsonl                              {"slow": "...", "fast": "..."} per line
//! ```
//!
//! Programs that take part in no pair form the pre-training pool.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{canonicalize, DatasetError, Formatter};
use crate::trace::{SourceProgram, Split, TestCase};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    Invalid { path: PathBuf, reason: String },
    #[error("program {program_id}: {source}")]
    Canonicalize {
        program_id: String,
        source: DatasetError,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Problem {
    pub problem_id: String,
    pub split: Split,
    pub programs: BTreeMap<String, SourceProgram>,
    pub tests: Vec<TestCase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pair {
    pub slow: String,
    pub fast: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Corpus {
    pub problems: BTreeMap<String, Problem>,
    /// Sorted by `(slow, fast)`.
    pub pairs: Vec<Pair>,
    program_index: BTreeMap<String, String>,
}

#[derive(Deserialize)]
struct ProblemFile {
    split: Split,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CorpusError + '_ {
    move |source| CorpusError::Io {
        path: path.to_owned(),
        source,
    }
}

fn invalid(path: &Path, reason: impl Into<String>) -> CorpusError {
    CorpusError::Invalid {
        path: path.to_owned(),
        reason: reason.into(),
    }
}

/// Sorted `(stem, path)` of files with the given extension.
fn files_with_ext(dir: &Path, ext: &str) -> Result<Vec<(String, PathBuf)>, CorpusError> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(io_err(dir))? {
        let path = entry.map_err(io_err(dir))?.path();
        if path.extension().and_then(|e| e.to_str()) == Some(ext) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                out.push((stem.to_owned(), path.clone()));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn read(path: &Path) -> Result<String, CorpusError> {
    std::fs::read_to_string(path).map_err(io_err(path))
}

impl Corpus {
    /// Loads a corpus, canonicalizing every program (comment removal plus
    /// the optional formatter).
    pub fn load(root: &Path, formatter: Option<&Formatter>) -> Result<Corpus, CorpusError> {
        let mut corpus = Corpus::default();
        let problems_dir = root.join("problems");
        if !problems_dir.is_dir() {
            return Ok(corpus);
        }
        let mut dirs: Vec<PathBuf> = std::fs::read_dir(&problems_dir)
            .map_err(io_err(&problems_dir))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        dirs.sort();
        for dir in dirs {
            let problem_id = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_owned();
            let meta_path = dir.join("problem.toml");
            let meta: ProblemFile = toml::from_str(&read(&meta_path)?)
                .map_err(|e| invalid(&meta_path, e.to_string()))?;

            let mut programs = BTreeMap::new();
            for (program_id, path) in files_with_ext(&dir.join("src"), "cpp")? {
                let raw = SourceProgram::new(program_id.clone(), problem_id.clone(), &read(&path)?, meta.split);
                let program = canonicalize(&raw, formatter).map_err(|source| CorpusError::Canonicalize {
                    program_id: program_id.clone(),
                    source,
                })?;
                if let Some(other) = corpus.program_index.insert(program_id.clone(), problem_id.clone()) {
                    return Err(invalid(&path, format!("program id also used in problem {other}")));
                }
                programs.insert(program_id, program);
            }

            let tests_dir = dir.join("tests");
            let mut tests = Vec::new();
            for (case_id, path) in files_with_ext(&tests_dir, "in")? {
                let out_path = tests_dir.join(format!("{case_id}.out"));
                tests.push(TestCase {
                    case_id,
                    stdin: read(&path)?,
                    expected_stdout: read(&out_path)?,
                });
            }

            corpus.problems.insert(
                problem_id.clone(),
                Problem {
                    problem_id,
                    split: meta.split,
                    programs,
                    tests,
                },
            );
        }

        let pairs_path = root.join("pairs.jsonl");
        if pairs_path.is_file() {
            let text = read(&pairs_path)?;
            for (i, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
                let pair: Pair = serde_json::from_str(line)
                    .map_err(|e| invalid(&pairs_path, format!("line {}: {e}", i + 1)))?;
                let (Some(ps), Some(pf)) = (corpus.problem_of(&pair.slow), corpus.problem_of(&pair.fast)) else {
                    return Err(invalid(&pairs_path, format!("line {}: unknown program", i + 1)));
                };
                if ps != pf {
                    return Err(invalid(
                        &pairs_path,
                        format!("line {}: {} and {} belong to different problems", i + 1, pair.slow, pair.fast),
                    ));
                }
                corpus.pairs.push(pair);
            }
            corpus.pairs.sort_by(|a, b| (&a.slow, &a.fast).cmp(&(&b.slow, &b.fast)));
            corpus.pairs.dedup();
        }
        Ok(corpus)
    }

    pub fn problem_of(&self, program_id: &str) -> Option<&str> {
        self.program_index.get(program_id).map(String::as_str)
    }

    pub fn program(&self, program_id: &str) -> Option<&SourceProgram> {
        let problem = self.problem_of(program_id)?;
        self.problems[problem].programs.get(program_id)
    }

    pub fn tests_for(&self, program_id: &str) -> &[TestCase] {
        self.problem_of(program_id)
            .map(|p| self.problems[p].tests.as_slice())
            .unwrap_or(&[])
    }

    pub fn paired_programs(&self) -> BTreeSet<&str> {
        self.pairs
            .iter()
            .flat_map(|p| [p.slow.as_str(), p.fast.as_str()])
            .collect()
    }

    /// Programs that appear in no pair, grouped by problem.
    pub fn pretrain_pool(&self) -> BTreeMap<String, Vec<&SourceProgram>> {
        let paired = self.paired_programs();
        self.problems
            .iter()
            .map(|(pid, p)| {
                let progs = p
                    .programs
                    .values()
                    .filter(|prog| !paired.contains(prog.program_id.as_str()))
                    .collect();
                (pid.clone(), progs)
            })
            .filter(|(_, v): &(String, Vec<&SourceProgram>)| !v.is_empty())
            .collect()
    }

    pub fn slow_programs(&self) -> BTreeSet<&str> {
        self.pairs.iter().map(|p| p.slow.as_str()).collect()
    }

    pub fn is_empty(&self) -> bool {
        self.problems.values().all(|p| p.programs.is_empty())
    }
}

/// Writes a corpus in the layout [`Corpus::load`] reads. Program texts are
/// written as given.
pub fn write_corpus(
    root: &Path,
    problems: &[(&str, Split, Vec<(&str, &str)>, Vec<(&str, &str, &str)>)],
    pairs: &[(&str, &str)],
) -> std::io::Result<()> {
    for (pid, split, programs, tests) in problems {
        let dir = root.join("problems").join(pid);
        std::fs::create_dir_all(dir.join("src"))?;
        std::fs::create_dir_all(dir.join("tests"))?;
        std::fs::write(dir.join("problem.toml"), format!("split = \"{}\"\n", split.as_str()))?;
        for (id, text) in programs {
            std::fs::write(dir.join("src").join(format!("{id}.cpp")), text)?;
        }
        for (case, input, output) in tests {
            std::fs::write(dir.join("tests").join(format!("{case}.in")), input)?;
            std::fs::write(dir.join("tests").join(format!("{case}.out")), output)?;
        }
    }
    let mut lines = String::new();
    for (slow, fast) in pairs {
        lines.push_str(&serde_json::to_string(&Pair { slow: slow.to_string(), fast: fast.to_string() }).expect("serializable"));
        lines.push('\n');
    }
    std::fs::create_dir_all(root)?;
    std::fs::write(root.join("pairs.jsonl"), lines)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_layout_and_partitions_programs() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(
            dir.path(),
            &[
                ("A", Split::Train, vec![("a1", "int main() { // hi\n}\n"), ("a2", "int main(){}"), ("a3", "int main(){return 0;}")], vec![("1", "1\n", "2\n")]),
                ("B", Split::Test, vec![("b1", "int main(){}")], vec![]),
            ],
            &[("a1", "a2")],
        )
        .unwrap();
        let c = Corpus::load(dir.path(), None).unwrap();
        assert_eq!(c.problems.len(), 2);
        assert_eq!(c.program("a1").unwrap().lines, vec!["int main() {", "}"]);
        assert_eq!(c.program("b1").unwrap().split, Split::Test);
        assert_eq!(c.tests_for("a2")[0].expected_stdout, "2\n");
        let pool = c.pretrain_pool();
        let ids: Vec<&str> = pool.values().flatten().map(|p| p.program_id.as_str()).collect();
        assert_eq!(ids, ["a3", "b1"]);
        assert_eq!(c.slow_programs().into_iter().collect::<Vec<_>>(), ["a1"]);
    }

    #[test]
    fn rejects_cross_problem_pairs_and_missing_outputs() {
        let dir = tempfile::tempdir().unwrap();
        write_corpus(
            dir.path(),
            &[
                ("A", Split::Train, vec![("a1", "x")], vec![]),
                ("B", Split::Train, vec![("b1", "y")], vec![]),
            ],
            &[("a1", "b1")],
        )
        .unwrap();
        assert!(matches!(Corpus::load(dir.path(), None), Err(CorpusError::Invalid { .. })));

        let dir = tempfile::tempdir().unwrap();
        write_corpus(dir.path(), &[("A", Split::Train, vec![("a1", "x")], vec![("1", "in", "out")])], &[]).unwrap();
        std::fs::remove_file(dir.path().join("problems/A/tests/1.out")).unwrap();
        assert!(matches!(Corpus::load(dir.path(), None), Err(CorpusError::Io { .. })));
    }

    #[test]
    fn empty_root_is_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let c = Corpus::load(dir.path(), None).unwrap();
        assert!(c.is_empty() && c.pairs.is_empty());
    }
}
