#![allow(dead_code)]

use std::path::{Path, PathBuf};

use execaware::process::find_executable;
use execaware::trace::{parse_trace_for, ExecutionTrace, SourceProgram, Split, TestCase};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn read_fixture(name: &str) -> String {
    std::fs::read_to_string(fixture(name)).unwrap()
}

pub fn worked_example_program() -> SourceProgram {
    SourceProgram::new("worked_example", "P0", &read_fixture("worked_example.cpp"), Split::Train)
}

pub fn worked_example_test() -> TestCase {
    TestCase {
        case_id: "keyofscience".into(),
        stdin: "keyofscience\n".into(),
        expected_stdout: "YES\n".into(),
    }
}

pub fn worked_example_trace() -> ExecutionTrace {
    parse_trace_for(&read_fixture("worked_example.trace"), &worked_example_program()).unwrap()
}

/// Expected per-line columns, `-` for an unlabeled line.
pub const WORKED_LE: [&str; 19] = [
    "-", "-", "-", "<e>", "<e>", "<e+>", "<e>", "<e+>", "<e+>", "<e>", "-", "<e+>", "<e+>", "<e>",
    "-", "<e>", "-", "<e>", "<e>",
];
pub const WORKED_LC: [&str; 19] = [
    "-", "-", "-", "<e>", "<e>", "<e>", "<e>", "<e>", "<e>", "<e>", "-", "<e>", "<e>", "<e>", "-",
    "<e>", "-", "<e>", "<e>",
];
pub const WORKED_BC: [&str; 19] = [
    "-", "-", "-", "-", "-", "-", "-", "<BC>", "<BC>", "<BC>", "-", "<BC>", "<BC>", "<BC>", "-",
    "<BC>", "<BNC>", "-", "-",
];

pub fn has(tool: &str) -> bool {
    find_executable(tool).is_some()
}
