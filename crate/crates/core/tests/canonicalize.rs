mod common;

use common::*;
use execaware::dataset::{canonicalize, strip_comments, Formatter};
use execaware::trace::{SourceProgram, Split};

#[test]
fn mixed_indent_matches_golden_formatting() {
    let formatter = Formatter::new("clang-format --style=LLVM");
    if formatter.check_available().is_err() {
        eprintln!("skipped: clang-format not found");
        return;
    }
    let program = SourceProgram::new("m", "P", &read_fixture("mixed_indent.cpp"), Split::Train);
    let out = canonicalize(&program, Some(&formatter)).unwrap();
    let golden = read_fixture("mixed_indent.golden.cpp");
    assert_eq!(out.text(), golden.trim_end_matches('\n'));
    let again = canonicalize(&out, Some(&formatter)).unwrap();
    assert_eq!(again, out);
}

#[test]
fn comment_removal_without_formatter() {
    let stripped = strip_comments(&read_fixture("mixed_indent.cpp"));
    assert!(!stripped.contains("//") && !stripped.contains("/*"));
    assert!(stripped.contains("\t\ts += x;\n"));
}
