use std::str::FromStr;

use super::ZonalError;
use crate::classify::{Label, LabelField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationRule {
    /// Most frequent non-NODATA label; ties go to the lowest label code.
    Majority,
    /// Label of block cell (f/2, f/2), clipped to partial edge blocks.
    Central,
}

impl FromStr for AggregationRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "majority" => Ok(AggregationRule::Majority),
            "central" => Ok(AggregationRule::Central),
            other => Err(format!("unknown aggregation rule {other:?}")),
        }
    }
}

/// Downsamples a label field by `factor` in both directions. Output is
/// ⌈w/f⌉ × ⌈h/f⌉; blocks on the right and bottom edges may be partial.
pub fn aggregate_categorical(
    field: &LabelField,
    factor: usize,
    rule: AggregationRule,
) -> Result<LabelField, ZonalError> {
    if factor < 2 {
        return Err(ZonalError::BadFactor(factor));
    }
    let (w, h) = (field.width(), field.height());
    let (ow, oh) = (w.div_ceil(factor), h.div_ceil(factor));
    let mut out = Vec::with_capacity(ow * oh);
    let mut block = Vec::with_capacity(factor * factor);
    for br in 0..oh {
        let r0 = br * factor;
        let r1 = (r0 + factor).min(h);
        for bc in 0..ow {
            let c0 = bc * factor;
            let c1 = (c0 + factor).min(w);
            let label = match rule {
                AggregationRule::Central => {
                    let r = r0 + (factor / 2).min(r1 - r0 - 1);
                    let c = c0 + (factor / 2).min(c1 - c0 - 1);
                    field.label(r, c)
                }
                AggregationRule::Majority => {
                    block.clear();
                    for r in r0..r1 {
                        block.extend(field.row(r)[c0..c1].iter().filter(|l| !l.is_nodata()));
                    }
                    block.sort_unstable();
                    majority_of_sorted(&block)
                }
            };
            out.push(label);
        }
    }
    Ok(LabelField::new(ow, oh, field.n_bands(), out).expect("labels come from a valid field"))
}

fn majority_of_sorted(sorted: &[Label]) -> Label {
    let mut best = (0usize, Label::NODATA);
    let mut i = 0;
    while i < sorted.len() {
        let run = sorted[i..].iter().take_while(|&&l| l == sorted[i]).count();
        // Strictly greater keeps the earliest (lowest) label on ties.
        if run > best.0 {
            best = (run, sorted[i]);
        }
        i += run;
    }
    best.1
}
