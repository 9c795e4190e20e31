//! Trace selection, sampling, length filtering and split hygiene.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{DatasetError, DatasetInstance, Task, TokenCounter};
use crate::aspects::{count_line_executions, merge_le_across_traces, AspectKind, LineAspects};
use crate::seed::item_rng;
use crate::trace::{ExecutionTrace, SourceProgram, Split};

pub const DEFAULT_TOKEN_LIMIT: usize = 512;
pub const DEFAULT_PER_PROBLEM_CAP: usize = 150;
/// `case_id` of aspects built from counts merged over several traces.
pub const MERGED_CASE_ID: &str = "*";

/// Aspects used to annotate a slow program: for line executions the
/// pointwise maximum over every complete trace, otherwise one complete trace
/// chosen uniformly at random (seeded per program).
pub fn select_trace_for_s3(
    program: &SourceProgram,
    traces: &[ExecutionTrace],
    kind: AspectKind,
    seed: u64,
) -> Result<LineAspects, DatasetError> {
    let mut complete: Vec<&ExecutionTrace> = traces.iter().filter(|t| t.is_complete()).collect();
    if complete.is_empty() {
        return Err(DatasetError::NoCompleteTraces);
    }
    complete.sort_by(|a, b| a.case_id.cmp(&b.case_id));
    if kind == AspectKind::LE && complete.len() > 1 {
        let counts = complete
            .iter()
            .map(|t| {
                let mut c = count_line_executions(t).map_err(crate::aspects::AspectError::from)?;
                c.resize(program.len().max(c.len()), 0);
                Ok(c)
            })
            .collect::<Result<Vec<_>, DatasetError>>()?;
        let merged = merge_le_across_traces(&counts)?;
        return Ok(LineAspects::with_exec_counts(program, merged, MERGED_CASE_ID)?);
    }
    let mut rng = item_rng(seed, &[&program.program_id, "s3", kind.as_str()]);
    let chosen = complete[rng.random_range(0..complete.len())];
    Ok(LineAspects::derive(program, chosen)?)
}

/// Keeps at most `cap` items per group, drawn uniformly without replacement
/// with a per-group seed. Kept items retain their relative order.
pub fn cap_per_problem<T: Clone>(
    groups: &BTreeMap<String, Vec<T>>,
    cap: usize,
    seed: u64,
) -> BTreeMap<String, Vec<T>> {
    groups
        .iter()
        .map(|(problem, items)| {
            let kept = if items.len() <= cap {
                items.clone()
            } else {
                let mut rng = item_rng(seed, &[problem, "cap"]);
                let mut idx = sample(&mut rng, items.len(), cap).into_vec();
                idx.sort_unstable();
                idx.into_iter().map(|i| items[i].clone()).collect()
            };
            (problem.clone(), kept)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dropped {
    pub id: String,
    pub source_tokens: usize,
    pub target_tokens: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DropReport {
    pub token_counter: String,
    pub limit: usize,
    pub kept: usize,
    pub dropped: Vec<Dropped>,
}

/// Does `inst` fit within `limit` tokens on both sides?
pub fn within_limit(
    inst: &DatasetInstance,
    counter: &dyn TokenCounter,
    limit: usize,
) -> Result<(bool, usize, usize), DatasetError> {
    let s = counter.count(&inst.source)?;
    let t = counter.count(&inst.target)?;
    Ok((s <= limit && t <= limit, s, t))
}

/// Keeps instances whose source and target both count at most `limit`
/// tokens, in input order, stamping the counter's name into their metadata.
pub fn filter_by_token_limit(
    instances: Vec<DatasetInstance>,
    counter: &dyn TokenCounter,
    limit: usize,
) -> Result<(Vec<DatasetInstance>, DropReport), DatasetError> {
    let mut report = DropReport {
        token_counter: counter.name().to_owned(),
        limit,
        ..Default::default()
    };
    let mut kept = Vec::with_capacity(instances.len());
    for mut inst in instances {
        let (fits, s, t) = within_limit(&inst, counter, limit)?;
        if fits {
            inst.meta.token_counter = counter.name().to_owned();
            kept.push(inst);
        } else {
            report.dropped.push(Dropped {
                id: inst.id,
                source_tokens: s,
                target_tokens: t,
            });
        }
    }
    report.kept = kept.len();
    Ok((kept, report))
}

/// Alternates classify and mlm instances one to one.
pub fn interleave(classify: Vec<DatasetInstance>, mlm: Vec<DatasetInstance>) -> Vec<DatasetInstance> {
    classify
        .into_iter()
        .zip(mlm)
        .flat_map(|(c, m)| [c, m])
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HygieneViolation {
    ProblemInSeveralSplits { problem_id: String, splits: Vec<Split> },
    PretrainProgramInFinetune { program_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HygieneReport {
    pub violations: Vec<HygieneViolation>,
}

impl HygieneReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Classify and mlm instances form the pre-training set, optimize instances
/// the fine-tuning set. Checks that every problem lives in one split and
/// that no pre-training program also appears (as slow or fast side) in
/// fine-tuning.
pub fn check_split_hygiene(instances: &[DatasetInstance]) -> HygieneReport {
    let mut splits: BTreeMap<&str, BTreeSet<Split>> = BTreeMap::new();
    let mut pretrain: BTreeSet<&str> = BTreeSet::new();
    let mut finetune: BTreeSet<&str> = BTreeSet::new();
    for inst in instances {
        let m = &inst.meta;
        splits.entry(&m.problem_id).or_default().insert(m.split);
        match inst.task {
            Task::Classify | Task::Mlm => {
                pretrain.insert(&m.program_id);
            }
            Task::Optimize => {
                finetune.insert(&m.program_id);
                if let Some(fast) = &m.fast_program_id {
                    finetune.insert(fast);
                }
            }
        }
    }
    let mut violations: Vec<HygieneViolation> = splits
        .into_iter()
        .filter(|(_, s)| s.len() > 1)
        .map(|(p, s)| HygieneViolation::ProblemInSeveralSplits {
            problem_id: p.to_owned(),
            splits: s.into_iter().collect(),
        })
        .collect();
    violations.extend(
        pretrain
            .intersection(&finetune)
            .map(|p| HygieneViolation::PretrainProgramInFinetune {
                program_id: (*p).to_owned(),
            }),
    );
    HygieneReport { violations }
}
