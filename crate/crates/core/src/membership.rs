//! Membership test built from a learned weight vector: a candidate `x` is
//! accepted when its surrogate value `g(⟨w̄,x⟩)` lies within `ε₁` of the
//! risk level `b = E[g(⟨w̄,x⟩)]` of the training distribution.
//!
//! Nothing guarantees that this separates `f⁻¹(1)` from its complement;
//! [`evaluate_classifier`] only measures how well it does.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::boolfn::{Assignment, BoolFnError, BooleanFunction};
use crate::model::{compensated_sum, DistributionTable, SurrogateSpec, WeightVector};

/// Largest dimension [`evaluate_classifier`] will sweep.
pub const CLASSIFIER_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MembershipError {
    #[error("empty sample")]
    EmptySample,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {n} exceeds the classifier sweep limit {limit}")]
    DimensionTooLarge { n: usize, limit: usize },
    #[error("invalid rule: {0}")]
    InvalidRule(String),
    #[error(transparent)]
    BoolFn(#[from] BoolFnError),
}

/// Where the risk level `b` is computed from.
#[derive(Debug, Clone, Copy)]
pub enum Source<'a> {
    Table(&'a DistributionTable),
    Samples(&'a [Assignment]),
}

/// `E[g(⟨w̄,x⟩)]` under a table, or the sample mean over a list.
pub fn estimate_b(g: &SurrogateSpec, wbar: &WeightVector, source: Source<'_>) -> Result<f64, MembershipError> {
    let w = wbar.as_slice();
    let mismatch = |got: usize| MembershipError::DimensionMismatch { expected: wbar.n(), got };
    match source {
        Source::Table(table) => {
            if table.n() != wbar.n() {
                return Err(mismatch(table.n()));
            }
            Ok(compensated_sum(
                table
                    .iter()
                    .filter(|&(_, _, p)| p > 0.0)
                    .map(|(_, x, p)| p * g.value(x.dot(w))),
            ))
        }
        Source::Samples(sample) => {
            if sample.is_empty() {
                return Err(MembershipError::EmptySample);
            }
            if let Some(x) = sample.iter().find(|x| x.len() != wbar.n()) {
                return Err(mismatch(x.len()));
            }
            Ok(compensated_sum(sample.iter().map(|x| g.value(x.dot(w)))) / sample.len() as f64)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MembershipRule {
    pub g: SurrogateSpec,
    pub wbar: WeightVector,
    pub b: f64,
    pub eps1: f64,
}

impl MembershipRule {
    pub fn new(g: SurrogateSpec, wbar: WeightVector, b: f64, eps1: f64) -> Result<Self, MembershipError> {
        if !b.is_finite() {
            return Err(MembershipError::InvalidRule(format!("b must be finite, got {b}")));
        }
        // ε₁ = 0 is admitted so the inclusive boundary can be exercised
        if eps1.is_nan() || eps1 < 0.0 {
            return Err(MembershipError::InvalidRule(format!("eps1 must be non-negative, got {eps1}")));
        }
        Ok(MembershipRule { g, wbar, b, eps1 })
    }

    /// `g(⟨w̄,x⟩)`.
    pub fn score(&self, x: &Assignment) -> Result<f64, MembershipError> {
        if x.len() != self.wbar.n() {
            return Err(MembershipError::DimensionMismatch { expected: self.wbar.n(), got: x.len() });
        }
        Ok(self.g.value(x.dot(self.wbar.as_slice())))
    }
}

/// Accept iff `|g(⟨w̄,x̄⟩) − b| ≤ ε₁`.
pub fn classify(rule: &MembershipRule, xbar: &Assignment) -> Result<bool, MembershipError> {
    Ok((rule.score(xbar)? - rule.b).abs() <= rule.eps1)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct ConfusionRecord {
    pub tp: u64,
    pub fp: u64,
    pub tn: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    /// `None` when nothing was accepted.
    pub precision: Option<f64>,
    /// `None` when `f` has no satisfying assignment.
    pub recall: Option<f64>,
}

impl ConfusionRecord {
    fn from_counts(tp: u64, fp: u64, tn: u64, fn_: u64) -> Self {
        let ratio = |num: u64, den: u64| (den > 0).then(|| num as f64 / den as f64);
        ConfusionRecord { tp, fp, tn, fn_, precision: ratio(tp, tp + fp), recall: ratio(tp, tp + fn_) }
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Classifies every point of the cube and compares against `f`.
pub fn evaluate_classifier(rule: &MembershipRule, f: &BooleanFunction) -> Result<ConfusionRecord, MembershipError> {
    let n = f.n();
    if n > CLASSIFIER_LIMIT {
        return Err(MembershipError::DimensionTooLarge { n, limit: CLASSIFIER_LIMIT });
    }
    if rule.wbar.n() != n {
        return Err(MembershipError::DimensionMismatch { expected: n, got: rule.wbar.n() });
    }
    let counts = (0..1u64 << n)
        .into_par_iter()
        .map(|idx| -> Result<[u64; 4], MembershipError> {
            let x = Assignment::from_index(idx, n);
            let accepted = classify(rule, &x)?;
            let truth = f.satisfies(&x)?;
            Ok(match (accepted, truth) {
                (true, true) => [1, 0, 0, 0],
                (true, false) => [0, 1, 0, 0],
                (false, false) => [0, 0, 1, 0],
                (false, true) => [0, 0, 0, 1],
            })
        })
        .try_reduce(|| [0; 4], |a, b| Ok([a[0] + b[0], a[1] + b[1], a[2] + b[2], a[3] + b[3]]))?;
    Ok(ConfusionRecord::from_counts(counts[0], counts[1], counts[2], counts[3]))
}
