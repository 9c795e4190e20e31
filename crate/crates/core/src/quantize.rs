//! Discrete token vocabulary for execution aspects.
//!
//! Line executions use four count bins, line coverage re-uses the
//! single-execution token, branch coverage has a covered/uncovered pair and
//! variable states are reduced to `(name, type bucket, value category)`.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aspects::BranchClass;
use crate::trace::{VarValue, VariableSnapshot};

pub const TOKEN_ONCE: &str = "<e>";
pub const TOKEN_FEW: &str = "<e+>";
pub const TOKEN_MANY: &str = "<E>";
pub const TOKEN_HOT: &str = "<E+>";
pub const TOKEN_BRANCH_COVERED: &str = "<BC>";
pub const TOKEN_BRANCH_NOT_COVERED: &str = "<BNC>";

/// Every token the quantizer can emit.
pub const ALL_TOKENS: [&str; 6] = [
    TOKEN_ONCE,
    TOKEN_FEW,
    TOKEN_MANY,
    TOKEN_HOT,
    TOKEN_BRANCH_COVERED,
    TOKEN_BRANCH_NOT_COVERED,
];

#[derive(Debug, Error)]
pub enum QuantizeError {
    #[error("calibration needs at least one count")]
    EmptyInput,
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("cannot read scheme file: {0}")]
    Io(#[from] std::io::Error),
    #[error("cannot parse scheme file: {0}")]
    Parse(#[from] toml::de::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypeBucket {
    BasicType,
    Class,
}

impl TypeBucket {
    pub fn as_str(self) -> &'static str {
        match self {
            TypeBucket::BasicType => "basic_type",
            TypeBucket::Class => "class",
        }
    }
}

pub const CAT_NEGATIVE_LARGE: &str = "NEGATIVE-LARGE";
pub const CAT_NEGATIVE_REG: &str = "NEGATIVE-REG";
pub const CAT_ZERO: &str = "ZERO";
pub const CAT_POSITIVE_REG: &str = "POSITIVE-REG";
pub const CAT_POSITIVE_LARGE: &str = "POSITIVE-LARGE";
pub const CAT_OTHER: &str = "OTHER";
pub const CAT_UNKNOWN: &str = "UNK";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedVariable {
    pub name: String,
    pub type_bucket: TypeBucket,
    pub value_category: String,
}

impl QuantizedVariable {
    /// `name bucket category`, the body of a variable-state comment.
    pub fn describe(&self) -> String {
        format!(
            "{} {} {}",
            self.name,
            self.type_bucket.as_str(),
            self.value_category
        )
    }
}

/// Bin thresholds and value-category limits.
///
/// Counts map as `1 → <e>`, `2..=few_max → <e+>`, `few_max+1..=many_max →
/// <E>`, above that `<E+>`; zero yields no token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuantizationScheme {
    pub few_max: u64,
    pub many_max: u64,
    /// Magnitude at which numeric values become `*-LARGE`.
    pub large_value: f64,
}

impl Default for QuantizationScheme {
    fn default() -> Self {
        QuantizationScheme {
            few_max: 5,
            many_max: 20,
            large_value: 1000.0,
        }
    }
}

impl QuantizationScheme {
    pub fn validate(&self) -> Result<(), QuantizeError> {
        if !(1 < self.few_max && self.few_max < self.many_max) {
            return Err(QuantizeError::InvalidScheme(format!(
                "bins must be strictly increasing: 1 < few_max ({}) < many_max ({})",
                self.few_max, self.many_max
            )));
        }
        if !(self.large_value.is_finite() && self.large_value > 0.0) {
            return Err(QuantizeError::InvalidScheme(
                "large_value must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn from_toml(text: &str) -> Result<Self, QuantizeError> {
        let scheme: QuantizationScheme = toml::from_str(text)?;
        scheme.validate()?;
        Ok(scheme)
    }

    pub fn load(path: &Path) -> Result<Self, QuantizeError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    /// Builds a scheme from calibrated (rounded) thresholds.
    pub fn from_thresholds(t: &LeThresholds) -> Result<Self, QuantizeError> {
        let scheme = QuantizationScheme {
            few_max: t.mid_rounded,
            many_max: t.high_rounded,
            ..Default::default()
        };
        scheme.validate()?;
        Ok(scheme)
    }

    /// Bin index of a count: `None` for zero, then 0..=3 in token order.
    pub fn le_bin(&self, count: u64) -> Option<usize> {
        match count {
            0 => None,
            1 => Some(0),
            c if c <= self.few_max => Some(1),
            c if c <= self.many_max => Some(2),
            _ => Some(3),
        }
    }
}

pub fn quantize_le(count: u64, scheme: &QuantizationScheme) -> Option<&'static str> {
    scheme
        .le_bin(count)
        .map(|bin| [TOKEN_ONCE, TOKEN_FEW, TOKEN_MANY, TOKEN_HOT][bin])
}

pub fn quantize_lc(covered: bool) -> Option<&'static str> {
    covered.then_some(TOKEN_ONCE)
}

pub fn quantize_bc(class: BranchClass) -> Option<&'static str> {
    match class {
        BranchClass::CoveredBranch => Some(TOKEN_BRANCH_COVERED),
        BranchClass::UncoveredBranch => Some(TOKEN_BRANCH_NOT_COVERED),
        BranchClass::None => None,
    }
}

const INTEGRAL_WORDS: &[&str] = &[
    "int", "long", "short", "unsigned", "signed", "float", "double", "size_t", "ssize_t",
    "ptrdiff_t", "intptr_t", "uintptr_t", "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t",
    "uint16_t", "uint32_t", "uint64_t", "__int128", "ll", "ull",
];
const CHARACTER_WORDS: &[&str] = &["char", "wchar_t", "char8_t", "char16_t", "char32_t", "bool", "_Bool"];
const QUALIFIERS: &[&str] = &["const", "volatile", "std", "struct"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum BasicKind {
    Numeric,
    CharOrBool,
    /// Pointer, reference or array of a basic type.
    Indirect,
}

/// Classifies debugger type text. Anything that is not a built-in
/// arithmetic, character or boolean type (or a pointer, reference or array
/// of one) is a class.
fn basic_kind(type_text: &str) -> Option<BasicKind> {
    let indirect = type_text.contains(['*', '&', '[']);
    let base: String = type_text
        .chars()
        .map(|c| if matches!(c, '*' | '&' | '[' | ']') { ' ' } else { c })
        .collect();
    let mut saw_char = false;
    let mut saw_any = false;
    for word in base.split(|c: char| c.is_whitespace() || c == ':') {
        if word.is_empty() || QUALIFIERS.contains(&word) || word.bytes().all(|b| b.is_ascii_digit())
        {
            continue;
        }
        if CHARACTER_WORDS.contains(&word) {
            saw_char = true;
        } else if !INTEGRAL_WORDS.contains(&word) {
            return None;
        }
        saw_any = true;
    }
    if !saw_any {
        return None;
    }
    Some(if indirect {
        BasicKind::Indirect
    } else if saw_char {
        BasicKind::CharOrBool
    } else {
        BasicKind::Numeric
    })
}

pub fn type_bucket(type_text: &str) -> TypeBucket {
    match basic_kind(type_text) {
        Some(_) => TypeBucket::BasicType,
        None => TypeBucket::Class,
    }
}

fn numeric_category(value: f64, scheme: &QuantizationScheme) -> &'static str {
    if value == 0.0 {
        CAT_ZERO
    } else if value <= -scheme.large_value {
        CAT_NEGATIVE_LARGE
    } else if value < 0.0 {
        CAT_NEGATIVE_REG
    } else if value < scheme.large_value {
        CAT_POSITIVE_REG
    } else {
        CAT_POSITIVE_LARGE
    }
}

pub fn quantize_variable(v: &VariableSnapshot, scheme: &QuantizationScheme) -> QuantizedVariable {
    let kind = basic_kind(&v.declared_type);
    let bucket = if kind.is_some() {
        TypeBucket::BasicType
    } else {
        TypeBucket::Class
    };
    let category = match (&v.value, kind) {
        (VarValue::Unassigned, _) => CAT_UNKNOWN,
        (VarValue::Value(text), Some(BasicKind::Numeric)) => text
            .trim()
            .parse::<f64>()
            .ok()
            .filter(|x| !x.is_nan())
            .map(|x| numeric_category(x, scheme))
            .unwrap_or(CAT_OTHER),
        _ => CAT_OTHER,
    };
    QuantizedVariable {
        name: v.name.clone(),
        type_bucket: bucket,
        value_category: category.to_owned(),
    }
}

/// Raw and rounded line-execution thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeThresholds {
    /// Median of the counts.
    pub mid: f64,
    /// `Q3 + 2.5 * IQR`.
    pub high: f64,
    /// `mid` rounded up to the granularity.
    pub mid_rounded: u64,
    /// `high` rounded down to the granularity.
    pub high_rounded: u64,
}

/// Outlier multiplier on the interquartile range.
pub const IQR_FENCE: f64 = 2.5;

/// Linear interpolation between closest ranks on sorted data.
fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Derives the `<e+>`/`<E>` split (median) and the `<E>`/`<E+>` split
/// (outlier fence) from the multiset of per-line counts greater than one.
///
/// The median is rounded up and the fence rounded down to multiples of
/// `granularity`.
pub fn calibrate_le_thresholds(
    counts: &[u64],
    granularity: u64,
) -> Result<LeThresholds, QuantizeError> {
    if counts.is_empty() {
        return Err(QuantizeError::EmptyInput);
    }
    let g = granularity.max(1);
    let mut sorted: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    sorted.sort_by(f64::total_cmp);
    let q1 = quantile_sorted(&sorted, 0.25);
    let mid = quantile_sorted(&sorted, 0.5);
    let q3 = quantile_sorted(&sorted, 0.75);
    let high = q3 + IQR_FENCE * (q3 - q1);
    let gf = g as f64;
    Ok(LeThresholds {
        mid,
        high,
        mid_rounded: ((mid / gf).ceil() * gf) as u64,
        high_rounded: ((high / gf).floor() * gf) as u64,
    })
}
