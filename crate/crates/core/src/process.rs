//! Child-process helpers: PATH lookup and bounded runs with captured output.

use std::ffi::OsStr;
use std::fs::File;
use std::io::{self, Read, Seek};
use std::path::{Path, PathBuf};
use std::process::{Command, ExitStatus, Stdio};
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

/// Resolves `program` the way a shell would: paths containing a separator
/// are checked directly, bare names are searched on `PATH`.
pub fn find_executable(program: impl AsRef<OsStr>) -> Option<PathBuf> {
    let program = Path::new(program.as_ref());
    if program.components().count() > 1 {
        return is_executable(program).then(|| program.to_path_buf());
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|candidate| is_executable(candidate))
}

fn is_executable(path: &Path) -> bool {
    use std::os::unix::fs::PermissionsExt;
    path.metadata()
        .map(|m| m.is_file() && m.permissions().mode() & 0o111 != 0)
        .unwrap_or(false)
}

/// Splits a command line on whitespace. Configuration values such as
/// `g++ -std=c++17 -O2` never need quoting in practice.
pub fn split_command(cmd: &str) -> Vec<String> {
    cmd.split_whitespace().map(str::to_owned).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Exited(i32),
    Signaled,
    TimedOut,
}

#[derive(Debug)]
pub struct Finished {
    pub termination: Termination,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub elapsed: Duration,
}

impl Finished {
    pub fn success(&self) -> bool {
        self.termination == Termination::Exited(0)
    }
}

fn termination_of(status: ExitStatus) -> Termination {
    match status.code() {
        Some(code) => Termination::Exited(code),
        None => Termination::Signaled,
    }
}

/// Runs `cmd` to completion or until `timeout`, feeding `stdin` from a file.
/// Output goes through temporary files so a chatty child can never block on
/// a full pipe while we wait on it.
pub fn run_bounded(
    mut cmd: Command,
    stdin: Option<&Path>,
    timeout: Duration,
) -> io::Result<Finished> {
    let mut out = tempfile::tempfile()?;
    let mut err = tempfile::tempfile()?;
    cmd.stdout(Stdio::from(out.try_clone()?))
        .stderr(Stdio::from(err.try_clone()?));
    match stdin {
        Some(path) => cmd.stdin(Stdio::from(File::open(path)?)),
        None => cmd.stdin(Stdio::null()),
    };

    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let termination = match child.wait_timeout(timeout)? {
        Some(status) => termination_of(status),
        None => {
            let _ = child.kill();
            let _ = child.wait();
            Termination::TimedOut
        }
    };
    let elapsed = start.elapsed();

    Ok(Finished {
        termination,
        stdout: read_back(&mut out)?,
        stderr: read_back(&mut err)?,
        elapsed,
    })
}

fn read_back(file: &mut File) -> io::Result<Vec<u8>> {
    file.rewind()?;
    let mut buf = Vec::new();
    file.read_to_end(&mut buf)?;
    Ok(buf)
}
