//! Exact divergences between distribution tables, and the decomposition
//! of log-loss risk into KL divergence plus entropy:
//!
//! ```text
//! E_{x~P}[-ln P_w(x)] = KL(P, P_w) + H(P)
//! ```
//!
//! All values are in nats.

use serde::Serialize;
use thiserror::Error;

use crate::boolfn::Assignment;
use crate::model::{self, compensated_sum, exact_distribution, DistributionTable, ModelError, WeightVector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("support violation at index {index}: P = {p} but Q = 0")]
    SupportViolation { index: usize, p: f64 },
    #[error("empty sample")]
    EmptySample,
    #[error("KL divergence must be non-negative, got {0}")]
    NegativeKl(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn same_dim(p: &DistributionTable, q: &DistributionTable) -> Result<(), MetricsError> {
    if p.n() == q.n() {
        Ok(())
    } else {
        Err(MetricsError::DimensionMismatch(p.n(), q.n()))
    }
}

pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}

/// `Σ_{P(x)>0} P(x) ln(P(x)/Q(x))`.
pub fn exact_kl(p: &DistributionTable, q: &DistributionTable) -> Result<f64, MetricsError> {
    same_dim(p, q)?;
    let mut terms = Vec::with_capacity(p.probs().len());
    for (index, (&pi, &qi)) in p.probs().iter().zip(q.probs()).enumerate() {
        if pi == 0.0 {
            continue;
        }
        if qi == 0.0 {
            return Err(MetricsError::SupportViolation { index, p: pi });
        }
        terms.push(pi * (pi / qi).ln());
    }
    // rounding can leave a tiny negative residue when P = Q
    Ok(compensated_sum(terms).max(0.0))
}

/// `Σ |P(x) − Q(x)|`, in `[0, 2]`.
pub fn l1_distance(p: &DistributionTable, q: &DistributionTable) -> Result<f64, MetricsError> {
    same_dim(p, q)?;
    Ok(compensated_sum(p.probs().iter().zip(q.probs()).map(|(a, b)| (a - b).abs())))
}

/// Shannon entropy with `0·ln(1/0) = 0`.
pub fn entropy(p: &DistributionTable) -> f64 {
    compensated_sum(p.probs().iter().filter(|&&pi| pi > 0.0).map(|&pi| -pi * pi.ln())).max(0.0)
}

/// `√(2·KL)`, the Pinsker upper bound on the ℓ₁ distance.
pub fn pinsker_bound(kl: f64) -> Result<f64, MetricsError> {
    if kl < 0.0 || kl.is_nan() {
        return Err(MetricsError::NegativeKl(kl));
    }
    Ok((2.0 * kl).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RiskDecomposition {
    pub risk: f64,
    pub kl: f64,
    pub entropy: f64,
}

impl RiskDecomposition {
    /// `|risk − (kl + entropy)|`.
    pub fn residual(&self) -> f64 {
        (self.risk - (self.kl + self.entropy)).abs()
    }
}

/// Risk of `w` under `P`, computed directly as `E_P[loss]`, next to the
/// KL and entropy terms computed independently from the tables.
pub fn risk_decomposition(p: &DistributionTable, w: &WeightVector) -> Result<RiskDecomposition, MetricsError> {
    if p.n() != w.n() {
        return Err(MetricsError::DimensionMismatch(p.n(), w.n()));
    }
    let risk = compensated_sum(
        p.iter()
            .filter(|&(_, _, pi)| pi > 0.0)
            .map(|(_, x, pi)| pi * -model::log_prob_unchecked(w.as_slice(), &x)),
    );
    let q = exact_distribution(w, p.n())?;
    Ok(RiskDecomposition { risk, kl: exact_kl(p, &q)?, entropy: entropy(p) })
}

/// `(1/|S|) Σ loss(w, x_i)`.
pub fn empirical_risk(w: &WeightVector, sample: &[Assignment]) -> Result<f64, MetricsError> {
    if sample.is_empty() {
        return Err(MetricsError::EmptySample);
    }
    let losses = sample
        .iter()
        .map(|x| model::loss(w, x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(compensated_sum(losses) / sample.len() as f64)
}
