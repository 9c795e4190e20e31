//! Pipeline configuration, loadable from TOML. Every field has a default so
//! a partial file (or none) is valid.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DEFAULT_MASK_RATE, DEFAULT_PER_PROBLEM_CAP, DEFAULT_TOKEN_LIMIT};
use crate::eval::{CompilerConfig, DEFAULT_CASE_TIMEOUT_SECS, DEFAULT_REPS};
use crate::trace::TracerConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid configuration file: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: PathBuf,
    pub traces: PathBuf,
    pub datasets: PathBuf,
    pub reports: PathBuf,
}

impl Default for Paths {
    fn default() -> Self {
        Paths {
            corpus: "corpus".into(),
            traces: "traces".into(),
            datasets: "datasets".into(),
            reports: "reports".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub token_limit: usize,
    pub mask_rate: f64,
    pub per_problem_cap: usize,
    /// Run after comment stripping, e.g. `clang-format --style=LLVM`.
    /// Empty disables formatting.
    pub formatter_cmd: String,
    /// `punct` for the built-in splitter, otherwise a tokenizer command
    /// speaking the line protocol.
    pub tokenizer_adapter: String,
    /// Quantization scheme file; empty uses the built-in bins.
    pub scheme_file: String,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            token_limit: DEFAULT_TOKEN_LIMIT,
            mask_rate: DEFAULT_MASK_RATE,
            per_problem_cap: DEFAULT_PER_PROBLEM_CAP,
            formatter_cmd: String::new(),
            tokenizer_adapter: "punct".into(),
            scheme_file: String::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Wallclock,
    Simulator,
}

impl std::str::FromStr for Backend {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "wallclock" => Ok(Backend::Wallclock),
            "simulator" => Ok(Backend::Simulator),
            _ => Err(format!("unknown backend `{s}` (expected wallclock or simulator)")),
        }
    }
}

// No `deny_unknown_fields` here: serde does not support it together with
// `flatten`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BenchConfig {
    #[serde(flatten)]
    pub compiler: CompilerConfig,
    pub backend: Backend,
    /// Template with `{binary}`, `{input}` and `{outdir}` placeholders.
    pub simulator_cmd: String,
    pub reps: u32,
    pub case_timeout_s: f64,
    /// Time pairs one at a time to reduce interference.
    pub sequential_timing: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            compiler: CompilerConfig::default(),
            backend: Backend::Wallclock,
            simulator_cmd: String::new(),
            reps: DEFAULT_REPS,
            case_timeout_s: DEFAULT_CASE_TIMEOUT_SECS,
            sequential_timing: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Root of all randomness; per-item generators derive from it.
    pub seed: u64,
    pub paths: Paths,
    pub tracer: TracerConfig,
    pub dataset: DatasetConfig,
    pub bench: BenchConfig,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_owned(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration always serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |what: &str| Err(ConfigError::Invalid(format!("{what} must be positive")));
        if !(self.tracer.time_cap_s > 0.0) {
            return bad("tracer.time_cap_s");
        }
        if self.dataset.token_limit == 0 {
            return bad("dataset.token_limit");
        }
        if !(self.dataset.mask_rate > 0.0 && self.dataset.mask_rate <= 1.0) {
            return Err(ConfigError::Invalid("dataset.mask_rate must be in (0, 1]".into()));
        }
        if self.dataset.per_problem_cap == 0 {
            return bad("dataset.per_problem_cap");
        }
        if self.bench.reps == 0 {
            return bad("bench.reps");
        }
        if !(self.bench.case_timeout_s > 0.0) {
            return bad("bench.case_timeout_s");
        }
        if self.bench.backend == Backend::Simulator && self.bench.simulator_cmd.trim().is_empty() {
            return Err(ConfigError::Invalid(
                "bench.simulator_cmd is required for the simulator backend".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml();
        assert!(text.contains("token_limit = 512"));
        assert!(text.contains("time_cap_s = 500.0"));
        assert!(text.contains("per_problem_cap = 150"));
        assert!(text.contains("compile_flags = \"-std=c++17 -O2\""));
        assert_eq!(PipelineConfig::from_toml(&text).unwrap(), cfg);
        cfg.validate().unwrap();
    }

    #[test]
    fn partial_file_and_validation() {
        let cfg = PipelineConfig::from_toml("seed = 9\n[bench]\nreps = 5\nbackend = \"simulator\"\n").unwrap();
        assert_eq!((cfg.seed, cfg.bench.reps), (9, 5));
        assert_eq!(cfg.dataset.token_limit, 512);
        assert!(cfg.validate().is_err());
        assert!(PipelineConfig::from_toml("[dataset]\nbogus = 1\n").is_err());
        let zero = PipelineConfig::from_toml("[dataset]\ntoken_limit = 0\n").unwrap();
        assert!(zero.validate().is_err());
    }
}
