//! Masked-language-modeling instances.

use rand::seq::index::sample;

use super::tokens::split_tokens;
use super::{DatasetError, DatasetInstance, InstanceMeta, Strategy, Task};
use crate::seed::item_rng;
use crate::trace::SourceProgram;

pub const DEFAULT_MASK_RATE: f64 = 0.15;

fn placeholder(k: usize) -> String {
    format!("<mask_{k}>")
}

/// Number of masked tokens: `rate * n` rounded half up, at least one.
pub fn mask_count(n: usize, rate: f64) -> usize {
    // The epsilon keeps exact halves such as 0.15 * 10 from rounding down
    // through binary representation error.
    let k = (n as f64 * rate + 0.5 + 1e-9).floor().max(0.0) as usize;
    k.clamp(1, n)
}

/// Replaces a seeded random subset of the program's tokens by numbered
/// placeholders in place. The target lists each placeholder followed by the
/// token it hides, in positional order.
///
/// `case_id` names the classify instance this one is paired with; it only
/// feeds the instance id and the seed.
pub fn build_mlm(
    program: &SourceProgram,
    case_id: Option<&str>,
    mask_rate: f64,
    seed: u64,
    strategy: Strategy,
) -> Result<DatasetInstance, DatasetError> {
    let text = program.text();
    let spans = split_tokens(&text);
    if spans.is_empty() {
        return Err(DatasetError::EmptyProgram);
    }
    let k = mask_count(spans.len(), mask_rate);
    let case = case_id.unwrap_or("");
    let mut rng = item_rng(seed, &[&program.program_id, case, "mlm"]);
    let mut picked = sample(&mut rng, spans.len(), k).into_vec();
    picked.sort_unstable();

    let mut source = String::from(Task::Mlm.prefix());
    let mut target = Vec::with_capacity(2 * k);
    let mut cursor = 0;
    for (j, &idx) in picked.iter().enumerate() {
        let (a, b) = spans[idx];
        source.push_str(&text[cursor..a]);
        source.push_str(&placeholder(j));
        target.push(placeholder(j));
        target.push(text[a..b].to_owned());
        cursor = b;
    }
    source.push_str(&text[cursor..]);

    Ok(DatasetInstance {
        id: match case_id {
            Some(c) => format!("{}__{c}__mlm", program.program_id),
            None => format!("{}__mlm", program.program_id),
        },
        task: Task::Mlm,
        source,
        target: target.join(" "),
        meta: InstanceMeta {
            program_id: program.program_id.clone(),
            case_id: case_id.map(str::to_owned),
            aspect: None,
            strategy,
            problem_id: program.problem_id.clone(),
            split: program.split,
            token_counter: String::new(),
            fast_program_id: None,
        },
    })
}

/// Substitutes the target tokens back into the source, returning the
/// original program text.
pub fn restore_mlm(instance: &DatasetInstance) -> Result<String, DatasetError> {
    let bad = |reason: &str| DatasetError::Format {
        line: 0,
        reason: reason.to_owned(),
    };
    let body = instance
        .source
        .strip_prefix(Task::Mlm.prefix())
        .ok_or_else(|| bad("missing mlm prefix"))?;
    let parts: Vec<&str> = instance.target.split(' ').collect();
    if parts.len() % 2 != 0 {
        return Err(bad("target is not placeholder/token pairs"));
    }
    let mut out = String::with_capacity(body.len());
    let mut rest = body;
    for (j, pair) in parts.chunks(2).enumerate() {
        let ph = placeholder(j);
        if pair[0] != ph {
            return Err(bad("placeholders out of order"));
        }
        let at = rest.find(&ph).ok_or_else(|| bad("placeholder missing from source"))?;
        out.push_str(&rest[..at]);
        out.push_str(pair[1]);
        rest = &rest[at + ph.len()..];
    }
    out.push_str(rest);
    Ok(out)
}
