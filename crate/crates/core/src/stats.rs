//! Paired comparison statistics: Wilcoxon signed-rank test, Vargha-Delaney
//! A12 and the matched-pairs rank-biserial correlation.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

pub const ALPHA: f64 = 0.05;
/// Largest number of nonzero differences for which p is computed exactly.
pub const EXACT_MAX_N: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("every paired difference is zero")]
    AllZeroDifferences,
    #[error("empty sample")]
    EmptyInput,
    #[error("non-finite value in sample")]
    NonFinite,
    #[error("samples are not aligned: {0}")]
    AlignmentError(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wilcoxon {
    /// Nonzero differences ranked.
    pub n: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_two_sided: f64,
    pub method: Method,
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their
/// positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks
}

/// Nonzero differences with their signed ranks.
fn signed_ranks(pairs: &[(f64, f64)]) -> Result<(Vec<f64>, Vec<f64>), StatsError> {
    if pairs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    if pairs.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(StatsError::NonFinite);
    }
    let d: Vec<f64> = pairs.iter().map(|(t, b)| t - b).filter(|d| *d != 0.0).collect();
    if d.is_empty() {
        return Err(StatsError::AllZeroDifferences);
    }
    let abs: Vec<f64> = d.iter().map(|x| x.abs()).collect();
    Ok((d, average_ranks(&abs)))
}

/// Distribution of twice the positive rank sum under the null hypothesis,
/// as counts over all sign assignments. Doubling keeps tied (half-integer)
/// ranks integral.
fn doubled_rank_sum_counts(ranks: &[f64]) -> Vec<f64> {
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0; total + 1];
    counts[0] = 1.0;
    let mut reach = 0;
    for &r in &doubled {
        for s in (0..=reach).rev() {
            if counts[s] != 0.0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    counts
}

fn exact_p(ranks: &[f64], w_plus: f64) -> f64 {
    let counts = doubled_rank_sum_counts(ranks);
    let total = 2f64.powi(ranks.len() as i32);
    let w2 = (2.0 * w_plus).round() as usize;
    let upper: f64 = counts[w2..].iter().sum::<f64>() / total;
    let lower: f64 = counts[..=w2].iter().sum::<f64>() / total;
    (2.0 * upper.min(lower)).min(1.0)
}

fn normal_p(ranks: &[f64], w_plus: f64) -> f64 {
    let n = ranks.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut tie_term = 0.0;
    let mut sorted = ranks.to_vec();
    sorted.sort_by(f64::total_cmp);
    for group in sorted.chunk_by(|a, b| a == b) {
        let t = group.len() as f64;
        tie_term += t * t * t - t;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("valid parameters");
    (2.0 * std_normal.sf(z)).min(1.0)
}

/// Two-sided signed-rank test of `treatment - baseline` over `(treatment,
/// baseline)` pairs. Zero differences are discarded before ranking.
pub fn wilcoxon_signed_rank(pairs: &[(f64, f64)]) -> Result<Wilcoxon, StatsError> {
    let (d, ranks) = signed_ranks(pairs)?;
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let w_minus: f64 = d.iter().zip(&ranks).filter(|(d, _)| **d < 0.0).map(|(_, r)| r).sum();
    let (p, method) = if d.len() <= EXACT_MAX_N {
        (exact_p(&ranks, w_plus), Method::Exact)
    } else {
        (normal_p(&ranks, w_plus), Method::NormalApprox)
    };
    Ok(Wilcoxon {
        n: d.len(),
        w_plus,
        w_minus,
        p_two_sided: p,
        method,
    })
}

/// Probability that a value drawn from `x` exceeds one drawn from `y`, ties
/// counting half.
pub fn vargha_delaney_a12(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    if x.is_empty() || y.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut score = 0.0;
    for a in x {
        for b in y {
            if a > b {
                score += 1.0;
            } else if a == b {
                score += 0.5;
            }
        }
    }
    Ok(score / (x.len() * y.len()) as f64)
}

/// `(W+ - W-) / (W+ + W-)`.
pub fn rank_biserial_r(pairs: &[(f64, f64)]) -> Result<f64, StatsError> {
    let w = wilcoxon_signed_rank(pairs)?;
    Ok((w.w_plus - w.w_minus) / (w.w_plus + w.w_minus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Magnitude {
    #[serde(rename = "N")]
    Negligible,
    #[serde(rename = "S")]
    Small,
    #[serde(rename = "M")]
    Medium,
    #[serde(rename = "L")]
    Large,
}

impl Magnitude {
    /// Labels the distance of A12 from 0.5 in either direction.
    pub fn of_a12(a12: f64) -> Magnitude {
        let a = a12.max(1.0 - a12);
        if a < 0.56 {
            Magnitude::Negligible
        } else if a < 0.64 {
            Magnitude::Small
        } else if a < 0.71 {
            Magnitude::Medium
        } else {
            Magnitude::Large
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Magnitude::Negligible => "N",
            Magnitude::Small => "S",
            Magnitude::Medium => "M",
            Magnitude::Large => "L",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub treatment: String,
    pub baseline: String,
    pub n: usize,
    pub n_nonzero: usize,
    pub w_plus: f64,
    pub w_minus: f64,
    pub p_two_sided: f64,
    pub method: Method,
    /// A12 over all cross pairs of the two samples, although they are
    /// paired.
    pub a12: f64,
    pub magnitude: Magnitude,
    pub r: f64,
    pub significant: bool,
    /// Every paired difference was zero.
    pub no_difference: bool,
}

/// Pairs two labeled samples by id and runs every statistic on
/// `treatment - baseline`. Both sides must hold exactly the same ids.
pub fn compare(
    treatment_label: &str,
    treatment: &[(String, f64)],
    baseline_label: &str,
    baseline: &[(String, f64)],
) -> Result<ComparisonReport, StatsError> {
    let index = |xs: &[(String, f64)], side: &str| -> Result<BTreeMap<String, f64>, StatsError> {
        let mut m = BTreeMap::new();
        for (id, v) in xs {
            if m.insert(id.clone(), *v).is_some() {
                return Err(StatsError::AlignmentError(format!("duplicate id `{id}` in {side}")));
            }
        }
        Ok(m)
    };
    let t = index(treatment, "treatment")?;
    let b = index(baseline, "baseline")?;
    if let Some(id) = t.keys().find(|k| !b.contains_key(*k)).or_else(|| b.keys().find(|k| !t.contains_key(*k))) {
        return Err(StatsError::AlignmentError(format!("id `{id}` is missing from one side")));
    }
    let pairs: Vec<(f64, f64)> = t.iter().map(|(id, v)| (*v, b[id])).collect();
    let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let a12 = vargha_delaney_a12(&xs, &ys)?;
    let base = ComparisonReport {
        treatment: treatment_label.to_owned(),
        baseline: baseline_label.to_owned(),
        n: pairs.len(),
        n_nonzero: 0,
        w_plus: 0.0,
        w_minus: 0.0,
        p_two_sided: 1.0,
        method: Method::Exact,
        a12,
        magnitude: Magnitude::of_a12(a12),
        r: 0.0,
        significant: false,
        no_difference: true,
    };
    match wilcoxon_signed_rank(&pairs) {
        Ok(w) => Ok(ComparisonReport {
            n_nonzero: w.n,
            r: (w.w_plus - w.w_minus) / (w.w_plus + w.w_minus),
            significant: w.p_two_sided < ALPHA,
            w_plus: w.w_plus,
            w_minus: w.w_minus,
            p_two_sided: w.p_two_sided,
            method: w.method,
            no_difference: false,
            ..base
        }),
        Err(StatsError::AllZeroDifferences) => Ok(base),
        Err(e) => Err(e),
    }
}

/// One row per comparison: p-value, A12 with its magnitude label, r.
pub fn render_comparisons(reports: &[ComparisonReport]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:<12} {:>5} {:>10} {:>10} {:>8}  note", "treatment", "baseline", "n", "p-value", "A12", "r");
    for c in reports {
        let note = if c.no_difference {
            "no difference"
        } else if c.significant {
            "significant"
        } else {
            ""
        };
        let _ = writeln!(
            s,
            "{:<12} {:<12} {:>5} {:>10.4} {:>6.2} ({}) {:>8.2}  {}",
            c.treatment,
            c.baseline,
            c.n,
            c.p_two_sided,
            c.a12,
            c.magnitude.letter(),
            c.r,
            note
        );
    }
    s
}
