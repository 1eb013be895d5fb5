//! The independent-bit exponential family
//! `P_w(x) = exp(⟨w,x⟩) / Π_i 2·cosh(w_i)` on `{-1,+1}^n`, its log-loss,
//! and the convex surrogate losses `g(⟨w,x⟩)`.
//!
//! Everything is in nats.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolfn::{Assignment, SatisfyingSet, ENUMERATION_LIMIT};

/// Allowed drift of a table's total mass from 1.
pub const SUM_TOLERANCE: f64 = 1e-12;
/// Slack allowed on `‖w‖ ≤ B`.
pub const RADIUS_SLACK: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dimension {n} exceeds the enumeration limit {limit}")]
    DimensionTooLarge { n: usize, limit: usize },
    #[error("invalid weight vector: {0}")]
    InvalidWeights(String),
    #[error("invalid distribution table: {0}")]
    InvalidTable(String),
    #[error("unsupported surrogate {0:?}")]
    UnsupportedSurrogate(String),
}

fn check_dim(expected: usize, got: usize) -> Result<(), ModelError> {
    if expected == got {
        Ok(())
    } else {
        Err(ModelError::DimensionMismatch { expected, got })
    }
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum<I: IntoIterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Parameter `w ∈ ℝⁿ` with `‖w‖₂ ≤ B`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightVector {
    w: Vec<f64>,
    radius: f64,
}

impl WeightVector {
    pub const DEFAULT_RADIUS: f64 = 1.0;

    pub fn new(w: Vec<f64>, radius: f64) -> Result<Self, ModelError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(ModelError::InvalidWeights(format!("radius must be positive, got {radius}")));
        }
        if w.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::InvalidWeights("non-finite coordinate".into()));
        }
        let norm = l2_norm(&w);
        if norm > radius + RADIUS_SLACK {
            return Err(ModelError::InvalidWeights(format!("norm {norm} exceeds radius {radius}")));
        }
        Ok(WeightVector { w, radius })
    }

    pub fn zeros(n: usize, radius: f64) -> Self {
        assert!(radius > 0.0, "radius must be positive");
        WeightVector { w: vec![0.0; n], radius }
    }

    /// Euclidean projection of `w` onto the radius ball.
    pub fn projected(mut w: Vec<f64>, radius: f64) -> Result<Self, ModelError> {
        project_onto_ball(&mut w, radius);
        WeightVector::new(w, radius)
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.w
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.w)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.w
    }

    /// One coordinate per line, shortest round-trip decimal form.
    pub fn to_text(&self) -> String {
        self.w.iter().map(|v| format!("{v}\n")).collect()
    }

    pub fn from_text(text: &str, radius: f64) -> Result<Self, ModelError> {
        let w = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(|l| {
                l.parse::<f64>()
                    .map_err(|_| ModelError::InvalidWeights(format!("cannot parse {l:?}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        WeightVector::new(w, radius)
    }
}

/// Rescales `w` onto the sphere of `radius` when it lies outside.
pub fn project_onto_ball(w: &mut [f64], radius: f64) {
    let norm = l2_norm(w);
    if norm > radius {
        let scale = radius / norm;
        w.iter_mut().for_each(|v| *v *= scale);
    }
}

/// `ln(2·cosh(t))` without overflow.
pub fn log_two_cosh(t: f64) -> f64 {
    let a = t.abs();
    a + (-2.0 * a).exp().ln_1p()
}

pub fn log_prob(w: &WeightVector, x: &Assignment) -> Result<f64, ModelError> {
    check_dim(w.n(), x.len())?;
    Ok(log_prob_unchecked(w.as_slice(), x))
}

pub(crate) fn log_prob_unchecked(w: &[f64], x: &Assignment) -> f64 {
    x.dot(w) - w.iter().map(|&wi| log_two_cosh(wi)).sum::<f64>()
}

/// Log-loss `-log P_w(x)`.
pub fn loss(w: &WeightVector, x: &Assignment) -> Result<f64, ModelError> {
    Ok(-log_prob(w, x)?)
}

/// Gradient of the log-loss, `tanh(w) - x`.
pub fn subgradient_logloss(w: &WeightVector, x: &Assignment) -> Result<Vec<f64>, ModelError> {
    check_dim(w.n(), x.len())?;
    let mut out = vec![0.0; w.n()];
    logloss_gradient_into(w.as_slice(), x, &mut out);
    Ok(out)
}

pub(crate) fn logloss_gradient_into(w: &[f64], x: &Assignment, out: &mut [f64]) {
    for ((o, &wi), &xi) in out.iter_mut().zip(w).zip(x.bits()) {
        *o = wi.tanh() - f64::from(xi);
    }
}

/// Probability that bit `i` equals `+1` under `P_w`.
pub fn marginal_plus(wi: f64) -> f64 {
    0.5 * (1.0 + wi.tanh())
}

/// Exact draw from `P_w`.
pub fn sample_model<R: Rng + ?Sized>(w: &WeightVector, rng: &mut R) -> Assignment {
    let bits = w
        .as_slice()
        .iter()
        .map(|&wi| if rng.gen::<f64>() < marginal_plus(wi) { 1 } else { -1 })
        .collect();
    Assignment::new(bits).expect("bits are ±1")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurrogateKind {
    /// `ln(1 + e^t)`
    Softplus,
    /// `√(t² + 5)`
    #[serde(rename = "phuber")]
    PseudoHuber,
    /// `ln(1 + e^{-t})`
    Logistic,
}

impl SurrogateKind {
    pub const ALL: [SurrogateKind; 3] =
        [SurrogateKind::Softplus, SurrogateKind::PseudoHuber, SurrogateKind::Logistic];
}

impl FromStr for SurrogateKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "softplus" => Ok(SurrogateKind::Softplus),
            "phuber" | "pseudo-huber" => Ok(SurrogateKind::PseudoHuber),
            "logistic" => Ok(SurrogateKind::Logistic),
            other => Err(ModelError::UnsupportedSurrogate(other.to_string())),
        }
    }
}

impl fmt::Display for SurrogateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SurrogateKind::Softplus => "softplus",
            SurrogateKind::PseudoHuber => "phuber",
            SurrogateKind::Logistic => "logistic",
        })
    }
}

fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

/// A convex, `lipschitz`-Lipschitz scalar loss applied to `⟨w,x⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SurrogateSpec {
    pub kind: SurrogateKind,
    pub lipschitz: f64,
}

impl SurrogateSpec {
    pub fn new(kind: SurrogateKind) -> Self {
        // all provided kinds have |g'| ≤ 1
        SurrogateSpec { kind, lipschitz: 1.0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self.kind {
            SurrogateKind::Softplus => softplus(t),
            SurrogateKind::PseudoHuber => (t * t + 5.0).sqrt(),
            SurrogateKind::Logistic => softplus(-t),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match self.kind {
            SurrogateKind::Softplus => sigmoid(t),
            SurrogateKind::PseudoHuber => t / (t * t + 5.0).sqrt(),
            SurrogateKind::Logistic => -sigmoid(-t),
        }
    }
}

/// `(g(⟨w,x⟩), g'(⟨w,x⟩)·x)`.
pub fn surrogate(g: &SurrogateSpec, w: &WeightVector, x: &Assignment) -> Result<(f64, Vec<f64>), ModelError> {
    check_dim(w.n(), x.len())?;
    let t = x.dot(w.as_slice());
    let d = g.derivative(t);
    Ok((g.value(t), x.bits().iter().map(|&b| d * f64::from(b)).collect()))
}

/// Probability vector over all `2^n` assignments in index order.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionTable {
    n: usize,
    probs: Vec<f64>,
}

impl DistributionTable {
    pub fn from_probs(n: usize, probs: Vec<f64>) -> Result<Self, ModelError> {
        if n > ENUMERATION_LIMIT {
            return Err(ModelError::DimensionTooLarge { n, limit: ENUMERATION_LIMIT });
        }
        if probs.len() != 1usize << n {
            return Err(ModelError::InvalidTable(format!("{} entries for n = {n}", probs.len())));
        }
        if let Some((i, p)) = probs.iter().enumerate().find(|(_, p)| !(p.is_finite() && **p >= 0.0)) {
            return Err(ModelError::InvalidTable(format!("entry {i} is {p}")));
        }
        let total = compensated_sum(probs.iter().copied());
        if (total - 1.0).abs() > SUM_TOLERANCE {
            return Err(ModelError::InvalidTable(format!("entries sum to {total}")));
        }
        Ok(DistributionTable { n, probs })
    }

    /// Normalizes non-negative `weights` into a table.
    pub fn from_weights(n: usize, weights: Vec<f64>) -> Result<Self, ModelError> {
        let total = compensated_sum(weights.iter().copied());
        if !(total > 0.0 && total.is_finite()) {
            return Err(ModelError::InvalidTable(format!("total mass {total}")));
        }
        DistributionTable::from_probs(n, weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self, ModelError> {
        if n > ENUMERATION_LIMIT {
            return Err(ModelError::DimensionTooLarge { n, limit: ENUMERATION_LIMIT });
        }
        let size = 1usize << n;
        DistributionTable::from_probs(n, vec![1.0 / size as f64; size])
    }

    /// Uniform distribution over a non-empty satisfying set.
    pub fn uniform_over(set: &SatisfyingSet) -> Result<Self, ModelError> {
        let n = set.n();
        if n > ENUMERATION_LIMIT {
            return Err(ModelError::DimensionTooLarge { n, limit: ENUMERATION_LIMIT });
        }
        if set.is_empty() {
            return Err(ModelError::InvalidTable("empty support".into()));
        }
        let mut probs = vec![0.0; 1usize << n];
        let p = 1.0 / set.len() as f64;
        for x in set.iter() {
            probs[x.index() as usize] = p;
        }
        DistributionTable::from_probs(n, probs)
    }

    pub fn point_mass(n: usize, index: usize) -> Result<Self, ModelError> {
        if n > ENUMERATION_LIMIT {
            return Err(ModelError::DimensionTooLarge { n, limit: ENUMERATION_LIMIT });
        }
        let mut probs = vec![0.0; 1usize << n];
        *probs
            .get_mut(index)
            .ok_or_else(|| ModelError::InvalidTable(format!("index {index} out of range")))? = 1.0;
        DistributionTable::from_probs(n, probs)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, x: &Assignment) -> f64 {
        self.probs[x.index() as usize]
    }

    /// `(index, assignment, probability)` over the whole cube.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Assignment, f64)> + '_ {
        let n = self.n;
        self.probs
            .iter()
            .enumerate()
            .map(move |(i, &p)| (i, Assignment::from_index(i as u64, n), p))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,bits,prob\n");
        for (i, x, p) in self.iter() {
            out.push_str(&format!("{i},{x},{p}\n"));
        }
        out
    }
}

/// The full table of `P_w`, built as the outer product of the per-bit
/// marginals.
pub fn exact_distribution(w: &WeightVector, n: usize) -> Result<DistributionTable, ModelError> {
    check_dim(w.n(), n)?;
    if n > ENUMERATION_LIMIT {
        return Err(ModelError::DimensionTooLarge { n, limit: ENUMERATION_LIMIT });
    }
    let mut probs = Vec::with_capacity(1usize << n);
    probs.push(1.0);
    for &wi in w.as_slice() {
        let plus = marginal_plus(wi);
        let minus = 1.0 - plus;
        probs = probs.iter().flat_map(|&p| [p * minus, p * plus]).collect();
    }
    DistributionTable::from_probs(n, probs)
}
