//! Learning a product distribution over `{-1,+1}^n` that is close, in KL
//! divergence and ℓ₁ distance, to the uniform distribution over the
//! satisfying assignments of a Boolean function.
//!
//! The pipeline draws satisfying assignments, minimises log-loss with
//! projected averaged stochastic subgradient descent, and checks the result
//! against exact quantities computed by enumerating the cube (small `n`).
//!
//! Modules:
//! - [`boolfn`]: Boolean functions (truth table, CNF, LTF), parsing, enumeration, sampling.
//! - [`model`]: the independent-bit exponential family `P_w`, log-loss and surrogate losses.
//! - [`sgd`]: projected averaged SGD and its iteration budget.
//! - [`metrics`]: KL, ℓ₁, entropy, risk decomposition, Pinsker bound.
//! - [`membership`]: the surrogate-level membership test and its confusion counts.
//! - [`experiment`]: the end-to-end runner behind the `satdist learn` command.

pub mod boolfn;
pub mod experiment;
pub mod membership;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod sgd;

pub use boolfn::{Assignment, BooleanFunction, Format, SatisfyingSet};
pub use metrics::RiskDecomposition;
pub use model::{DistributionTable, SurrogateKind, SurrogateSpec, WeightVector};
pub use sgd::{SgdConfig, SgdTrace};
