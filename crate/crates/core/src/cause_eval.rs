//! Multi-label failure-cause metrics and the per-bit pipeline tally.
//!
//! Green is the empty-set sentinel and is never scored as a cause.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::FailureCause;

/// Causes scored by default: every non-green cause except stick-slip.
pub fn default_included() -> Vec<FailureCause> {
    FailureCause::DAMAGE_CAUSES
        .iter()
        .copied()
        .filter(|c| *c != FailureCause::StickSlip)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CauseMetrics {
    pub cause: FailureCause,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Undefined when precision + recall = 0.
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacroAverage {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    /// Mean over causes with a defined F1.
    pub f1: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MultiLabelReport {
    pub n_bits: usize,
    pub causes: Vec<CauseMetrics>,
    pub macro_average: MacroAverage,
}

impl MultiLabelReport {
    pub fn get(&self, cause: FailureCause) -> Option<&CauseMetrics> {
        self.causes.iter().find(|m| m.cause == cause)
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = xs.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn multilabel_report(
    pred: &[BTreeSet<FailureCause>],
    truth: &[BTreeSet<FailureCause>],
    included: &[FailureCause],
) -> Result<MultiLabelReport> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    if pred.is_empty() {
        return Err(Error::InvalidValue("no bits to evaluate".into()));
    }
    let n = pred.len();
    let causes: Vec<CauseMetrics> = included
        .iter()
        .filter(|c| **c != FailureCause::Green)
        .map(|&cause| {
            let (mut tp, mut fp, mut fn_, mut tn) = (0, 0, 0, 0);
            for (p, t) in pred.iter().zip(truth) {
                match (p.contains(&cause), t.contains(&cause)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            let f1 =
                (precision + recall > 0.0).then(|| 2.0 * precision * recall / (precision + recall));
            CauseMetrics {
                cause,
                tp,
                fp,
                fn_,
                tn,
                accuracy: ratio(tp + tn, n),
                precision,
                recall,
                f1,
            }
        })
        .collect();
    let macro_average = MacroAverage {
        accuracy: mean(causes.iter().map(|c| c.accuracy)).unwrap_or(0.0),
        precision: mean(causes.iter().map(|c| c.precision)).unwrap_or(0.0),
        recall: mean(causes.iter().map(|c| c.recall)).unwrap_or(0.0),
        f1: mean(causes.iter().filter_map(|c| c.f1)),
    };
    Ok(MultiLabelReport {
        n_bits: n,
        causes,
        macro_average,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TallyRow {
    pub bit_id: String,
    pub existing: BTreeSet<FailureCause>,
    pub detected: BTreeSet<FailureCause>,
    pub correct: usize,
    pub false_detected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineTally {
    pub bits: Vec<TallyRow>,
    pub total_causes: usize,
    pub correctly_detected: usize,
    pub falsely_detected: usize,
}

fn without_green(s: &BTreeSet<FailureCause>) -> BTreeSet<FailureCause> {
    s.iter()
        .copied()
        .filter(|c| *c != FailureCause::Green)
        .collect()
}

/// Per-bit comparison of detected against existing causes.
pub fn pipeline_tally(
    bit_ids: &[String],
    pred: &[BTreeSet<FailureCause>],
    truth: &[BTreeSet<FailureCause>],
) -> Result<PipelineTally> {
    if pred.len() != truth.len() || bit_ids.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: pred.len(),
            right: truth.len(),
        });
    }
    let bits: Vec<TallyRow> = bit_ids
        .iter()
        .zip(pred.iter().zip(truth))
        .map(|(id, (p, t))| {
            let p = without_green(p);
            let t = without_green(t);
            TallyRow {
                bit_id: id.clone(),
                correct: p.intersection(&t).count(),
                false_detected: p.difference(&t).count(),
                existing: t,
                detected: p,
            }
        })
        .collect();
    Ok(PipelineTally {
        total_causes: bits.iter().map(|b| b.existing.len()).sum(),
        correctly_detected: bits.iter().map(|b| b.correct).sum(),
        falsely_detected: bits.iter().map(|b| b.false_detected).sum(),
        bits,
    })
}
