//! Projected, averaged stochastic subgradient descent.
//!
//! Starting from `w⁽¹⁾ = 0`, each step draws `x`, takes a subgradient `v`
//! of the loss at the current iterate, moves to `w − η·v` and projects back
//! onto the ball of radius `B`. The output is the uniform average of the
//! `T` iterates `w⁽¹⁾ … w⁽ᵀ⁾`, the initial zero included.
//!
//! For a convex, `ρ`-Lipschitz loss over the `B`-ball, `T = ⌈B²ρ²/ε²⌉` steps
//! with `η = B/(ρ√T)` give expected excess risk at most `ε`.

use thiserror::Error;

use crate::boolfn::{Assignment, BoolFnError, SatisfyingSampler};
use crate::model::{self, l2_norm, project_onto_ball, SurrogateSpec, WeightVector};
use crate::rng::{stream_rng, Rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SgdError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("subgradient oracle returned a non-finite value at step {step}")]
    NonFinite { step: u64 },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("sampler failed: {0}")]
    Sampler(#[from] BoolFnError),
}

fn positive(name: &str, v: f64) -> Result<(), SgdError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SgdError::InvalidConfig(format!("{name} must be positive and finite, got {v}")))
    }
}

/// `⌈B²ρ²/ε²⌉`.
pub fn iteration_budget(radius: f64, rho: f64, epsilon: f64) -> Result<u64, SgdError> {
    positive("radius", radius)?;
    positive("rho", rho)?;
    positive("epsilon", epsilon)?;
    let exact = (radius * rho / epsilon).powi(2);
    // absorb representation error such as 1/0.1² = 99.99999999999997
    let nearest = exact.round();
    let t = if (exact - nearest).abs() <= 1e-9 * nearest.max(1.0) { nearest } else { exact.ceil() };
    if t >= u64::MAX as f64 {
        return Err(SgdError::InvalidConfig(format!("iteration budget {exact} overflows")));
    }
    Ok((t as u64).max(1))
}

/// `B / (ρ·√T)`.
pub fn step_size(radius: f64, rho: f64, iterations: u64) -> Result<f64, SgdError> {
    positive("radius", radius)?;
    positive("rho", rho)?;
    if iterations == 0 {
        return Err(SgdError::InvalidConfig("iteration count must be at least 1".into()));
    }
    Ok(radius / (rho * (iterations as f64).sqrt()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdConfig {
    pub radius: f64,
    pub rho: f64,
    pub epsilon: f64,
    pub iterations: u64,
    pub step: f64,
    pub seed: u64,
    /// Generator stream under `seed`, see [`crate::rng`].
    pub stream: u64,
    /// Record the loss of each iterate on its sample.
    pub record_risk: bool,
}

impl SgdConfig {
    /// Derives `T` and `η` from the target accuracy.
    pub fn from_budget(radius: f64, rho: f64, epsilon: f64, seed: u64) -> Result<Self, SgdError> {
        let iterations = iteration_budget(radius, rho, epsilon)?;
        let step = step_size(radius, rho, iterations)?;
        Ok(SgdConfig { radius, rho, epsilon, iterations, step, seed, stream: 0, record_risk: false })
    }

    /// Explicit step size and iteration count; `epsilon` is set to the
    /// guarantee `Bρ/√T` of the standard step.
    pub fn with_schedule(radius: f64, rho: f64, step: f64, iterations: u64, seed: u64) -> Result<Self, SgdError> {
        let cfg = SgdConfig {
            radius,
            rho,
            epsilon: radius * rho / (iterations.max(1) as f64).sqrt(),
            iterations,
            step,
            seed,
            stream: 0,
            record_risk: false,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), SgdError> {
        positive("radius", self.radius)?;
        positive("rho", self.rho)?;
        positive("epsilon", self.epsilon)?;
        positive("step", self.step)?;
        if self.iterations == 0 {
            return Err(SgdError::InvalidConfig("iteration count must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SgdTrace {
    pub averaged: WeightVector,
    /// `‖w⁽ᵗ⁾‖` for `t = 1..=T`.
    pub iterate_norms: Vec<f64>,
    /// Loss of `w⁽ᵗ⁾` on the sample drawn at step `t`, when recorded.
    pub risk_estimates: Option<Vec<f64>>,
    pub steps: u64,
}

impl SgdTrace {
    /// CSV with columns `t,risk_estimate,iterate_norm`; the risk column is
    /// empty when it was not recorded.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,risk_estimate,iterate_norm\n");
        for (i, norm) in self.iterate_norms.iter().enumerate() {
            let risk = self
                .risk_estimates
                .as_ref()
                .map(|r| r[i].to_string())
                .unwrap_or_default();
            out.push_str(&format!("{},{risk},{norm}\n", i + 1));
        }
        out
    }
}

/// A loss `l(w, x)` together with one of its subgradients.
pub trait SubgradientOracle {
    fn loss(&self, w: &[f64], x: &Assignment) -> f64;
    /// Writes an element of `∂l(w, x)` into `out`.
    fn subgradient(&self, w: &[f64], x: &Assignment, out: &mut [f64]);
}

/// `-log P_w(x)` for the independent-bit family.
#[derive(Debug, Clone, Copy, Default)]
pub struct LogLoss;

impl SubgradientOracle for LogLoss {
    fn loss(&self, w: &[f64], x: &Assignment) -> f64 {
        -model::log_prob_unchecked(w, x)
    }

    fn subgradient(&self, w: &[f64], x: &Assignment, out: &mut [f64]) {
        model::logloss_gradient_into(w, x, out);
    }
}

/// `g(⟨w,x⟩)`.
#[derive(Debug, Clone, Copy)]
pub struct SurrogateLoss(pub SurrogateSpec);

impl SubgradientOracle for SurrogateLoss {
    fn loss(&self, w: &[f64], x: &Assignment) -> f64 {
        self.0.value(x.dot(w))
    }

    fn subgradient(&self, w: &[f64], x: &Assignment, out: &mut [f64]) {
        let d = self.0.derivative(x.dot(w));
        for (o, &b) in out.iter_mut().zip(x.bits()) {
            *o = d * f64::from(b);
        }
    }
}

/// i.i.d. draws of assignments.
pub trait AssignmentSource {
    fn dim(&self) -> usize;
    fn draw(&mut self, rng: &mut Rng) -> Result<&Assignment, SgdError>;
}

/// Uniform draws, with replacement, from a fixed sample.
#[derive(Debug, Clone)]
pub struct EmpiricalSource<'a> {
    n: usize,
    sample: &'a [Assignment],
}

impl<'a> EmpiricalSource<'a> {
    pub fn new(sample: &'a [Assignment]) -> Result<Self, SgdError> {
        let n = sample
            .first()
            .map(Assignment::len)
            .ok_or_else(|| SgdError::InvalidConfig("empty sample".into()))?;
        if let Some(x) = sample.iter().find(|x| x.len() != n) {
            return Err(SgdError::DimensionMismatch { expected: n, got: x.len() });
        }
        Ok(EmpiricalSource { n, sample })
    }
}

impl AssignmentSource for EmpiricalSource<'_> {
    fn dim(&self) -> usize {
        self.n
    }

    fn draw(&mut self, rng: &mut Rng) -> Result<&Assignment, SgdError> {
        use rand::Rng as _;
        Ok(&self.sample[rng.gen_range(0..self.sample.len())])
    }
}

/// Exact draws from `P_w`.
#[derive(Debug, Clone)]
pub struct ModelSource {
    w: WeightVector,
    last: Assignment,
}

impl ModelSource {
    pub fn new(w: WeightVector) -> Self {
        let last = Assignment::ones(w.n());
        ModelSource { w, last }
    }
}

impl AssignmentSource for ModelSource {
    fn dim(&self) -> usize {
        self.w.n()
    }

    fn draw(&mut self, rng: &mut Rng) -> Result<&Assignment, SgdError> {
        self.last = model::sample_model(&self.w, rng);
        Ok(&self.last)
    }
}

/// Uniform draws from `f⁻¹(1)`.
#[derive(Debug, Clone)]
pub struct SatisfyingSource {
    sampler: SatisfyingSampler,
    last: Assignment,
}

impl SatisfyingSource {
    pub fn new(sampler: SatisfyingSampler) -> Self {
        let last = Assignment::ones(sampler.n());
        SatisfyingSource { sampler, last }
    }
}

impl AssignmentSource for SatisfyingSource {
    fn dim(&self) -> usize {
        self.sampler.n()
    }

    fn draw(&mut self, rng: &mut Rng) -> Result<&Assignment, SgdError> {
        self.last = self.sampler.sample(rng)?;
        Ok(&self.last)
    }
}

pub fn run_sgd<O, S>(oracle: &O, source: &mut S, config: &SgdConfig) -> Result<SgdTrace, SgdError>
where
    O: SubgradientOracle + ?Sized,
    S: AssignmentSource + ?Sized,
{
    config.validate()?;
    let mut rng = stream_rng(config.seed, config.stream);
    let n = source.dim();
    let capacity = usize::try_from(config.iterations).unwrap_or(usize::MAX).min(1 << 24);

    let mut w = vec![0.0; n];
    let mut sum = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut norms = Vec::with_capacity(capacity);
    let mut risks = config.record_risk.then(|| Vec::with_capacity(capacity));

    for step in 0..config.iterations {
        for (s, wi) in sum.iter_mut().zip(&w) {
            *s += wi;
        }
        norms.push(l2_norm(&w));

        let x = source.draw(&mut rng)?;
        if x.len() != n {
            return Err(SgdError::DimensionMismatch { expected: n, got: x.len() });
        }
        if let Some(r) = risks.as_mut() {
            r.push(oracle.loss(&w, x));
        }
        oracle.subgradient(&w, x, &mut v);
        if v.iter().any(|g| !g.is_finite()) {
            return Err(SgdError::NonFinite { step: step + 1 });
        }
        for (wi, gi) in w.iter_mut().zip(&v) {
            *wi -= config.step * gi;
        }
        project_onto_ball(&mut w, config.radius);
    }

    let t = config.iterations as f64;
    let averaged: Vec<f64> = sum.into_iter().map(|s| s / t).collect();
    let averaged = WeightVector::new(averaged, config.radius)
        .map_err(|e| SgdError::InvalidConfig(e.to_string()))?;
    Ok(SgdTrace { averaged, iterate_norms: norms, risk_estimates: risks, steps: config.iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boolfn::BooleanFunction;
    use crate::metrics::exact_kl;
    use crate::model::exact_distribution;
    use rand::Rng as _;

    #[test]
    fn budget_examples() {
        assert_eq!(iteration_budget(1.0, 1.0, 0.1).unwrap(), 100);
        assert_eq!(iteration_budget(1.0, 1.0, 1.0).unwrap(), 1);
        assert_eq!(iteration_budget(2.0, 3.0, 0.5).unwrap(), 144);
        assert_eq!(iteration_budget(1.0, 1.0, 0.3).unwrap(), 12);
        assert_eq!(iteration_budget(1.0, 1.0, 5.0).unwrap(), 1);
        assert!(iteration_budget(0.0, 1.0, 0.1).is_err());
        assert!(iteration_budget(1.0, -1.0, 0.1).is_err());
        assert!(iteration_budget(1.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn step_examples() {
        assert!((step_size(1.0, 1.0, 100).unwrap() - 0.1).abs() < 1e-15);
        assert_eq!(step_size(1.0, 1.0, 1).unwrap(), 1.0);
        assert_eq!(step_size(2.0, 1.0, 4).unwrap(), 1.0);
        assert!(step_size(1.0, 1.0, 0).is_err());
        assert!(step_size(1.0, 0.0, 10).is_err());
    }

    /// One-dimensional absolute loss `|w − z|`, `z = +1` w.p. 3/4, else −1.
    struct Absolute;
    struct BiasedSign(Assignment, Assignment);

    impl SubgradientOracle for Absolute {
        fn loss(&self, w: &[f64], x: &Assignment) -> f64 {
            (w[0] - f64::from(x.get(0))).abs()
        }
        fn subgradient(&self, w: &[f64], x: &Assignment, out: &mut [f64]) {
            out[0] = (w[0] - f64::from(x.get(0))).signum();
        }
    }

    impl AssignmentSource for BiasedSign {
        fn dim(&self) -> usize {
            1
        }
        fn draw(&mut self, rng: &mut Rng) -> Result<&Assignment, SgdError> {
            Ok(if rng.gen_bool(0.75) { &self.0 } else { &self.1 })
        }
    }

    fn absolute_excess(step: f64, iterations: u64, seeds: u64) -> f64 {
        let mut total = 0.0;
        for seed in 0..seeds {
            let cfg = SgdConfig::with_schedule(1.0, 1.0, step, iterations, seed).unwrap();
            let mut src = BiasedSign(Assignment::ones(1), Assignment::new(vec![-1]).unwrap());
            let w = run_sgd(&Absolute, &mut src, &cfg).unwrap().averaged.as_slice()[0];
            // risk on [-1, 1] is 1 − w/2, minimised at w = 1
            total += (1.0 - 0.5 * w) - 0.5;
        }
        total / seeds as f64
    }

    #[test]
    fn standard_step_meets_accuracy_on_absolute_loss() {
        let epsilon = 0.1;
        let t = iteration_budget(1.0, 1.0, epsilon).unwrap();
        let eta = step_size(1.0, 1.0, t).unwrap();
        assert!(absolute_excess(eta, t, 200) <= epsilon);
        // sweep: steps a few times smaller than B/(ρ√T) do not reach ε
        let grid = [0.003, 0.01, 0.03, 0.1, 0.3, 1.0];
        let passing: Vec<f64> = grid.iter().copied().filter(|&s| absolute_excess(s, t, 200) <= epsilon).collect();
        assert!(passing.contains(&0.1), "{passing:?}");
        assert!(!passing.contains(&0.003), "{passing:?}");
    }

    #[test]
    fn single_step_returns_zero() {
        let cfg = SgdConfig::with_schedule(1.0, 1.0, 0.5, 1, 3).unwrap();
        let mut src = ModelSource::new(WeightVector::new(vec![0.5, -0.2], 1.0).unwrap());
        let trace = run_sgd(&LogLoss, &mut src, &cfg).unwrap();
        assert_eq!(trace.averaged.as_slice(), &[0.0, 0.0]);
        assert_eq!(trace.steps, 1);
    }

    #[test]
    fn iterates_stay_in_ball_and_average_is_exact() {
        let cfg = SgdConfig { record_risk: true, ..SgdConfig::with_schedule(0.5, 1.0, 2.0, 200, 1).unwrap() };
        let target = WeightVector::new(vec![0.9, 0.0, -0.3], 1.0).unwrap();
        let mut src = ModelSource::new(target);
        let trace = run_sgd(&LogLoss, &mut src, &cfg).unwrap();
        assert!(trace.iterate_norms.iter().all(|&r| r <= 0.5 + 1e-12));
        assert!(trace.iterate_norms.iter().skip(1).any(|&r| (r - 0.5).abs() < 1e-12));
        assert!(trace.averaged.norm() <= 0.5 + 1e-12);
        let risks = trace.risk_estimates.as_ref().unwrap();
        assert_eq!(risks.len(), 200);
        assert!((risks[0] - 3.0 * std::f64::consts::LN_2).abs() < 1e-12);
        let csv = trace.to_csv();
        assert_eq!(csv.lines().count(), 201);
        assert!(csv.starts_with("t,risk_estimate,iterate_norm\n1,"));
    }

    #[test]
    fn same_seed_same_output() {
        let cfg = SgdConfig::from_budget(1.0, 2.0, 0.2, 77).unwrap();
        let target = WeightVector::new(vec![0.3, 0.3, -0.2, 0.1], 1.0).unwrap();
        let a = run_sgd(&LogLoss, &mut ModelSource::new(target.clone()), &cfg).unwrap();
        let b = run_sgd(&LogLoss, &mut ModelSource::new(target.clone()), &cfg).unwrap();
        assert_eq!(a, b);
        let other = SgdConfig { seed: 78, ..cfg.clone() };
        let c = run_sgd(&LogLoss, &mut ModelSource::new(target), &other).unwrap();
        assert_ne!(a.averaged, c.averaged);
    }

    #[test]
    fn uniform_target_stays_near_zero() {
        // f ≡ 1: w = 0 is optimal; excess risk is KL(U, P_w̄)
        let n = 4;
        let f = BooleanFunction::constant(n, true);
        let epsilon = 0.2;
        let rho = 2.0 * (n as f64).sqrt();
        let uniform = crate::model::DistributionTable::uniform(n).unwrap();
        let mut total = 0.0;
        for seed in 0..50 {
            let cfg = SgdConfig::from_budget(1.0, rho, epsilon, seed).unwrap();
            let mut src = SatisfyingSource::new(SatisfyingSampler::new(&f).unwrap());
            let trace = run_sgd(&LogLoss, &mut src, &cfg).unwrap();
            let q = exact_distribution(&trace.averaged, n).unwrap();
            total += exact_kl(&uniform, &q).unwrap();
        }
        assert!(total / 50.0 <= epsilon);
    }

    #[test]
    fn surrogate_oracle_runs() {
        let g = SurrogateSpec::new(crate::model::SurrogateKind::PseudoHuber);
        let cfg = SgdConfig::from_budget(1.0, 3.0f64.sqrt(), 0.1, 0).unwrap();
        let mut src = SatisfyingSource::new(SatisfyingSampler::new(&BooleanFunction::and_all(3)).unwrap());
        let trace = run_sgd(&SurrogateLoss(g), &mut src, &cfg).unwrap();
        // pseudo-Huber is minimised at ⟨w, 1⟩ = 0, which w = 0 already attains
        assert!(trace.averaged.norm() < 1e-12);
    }

    struct Exploding;
    impl SubgradientOracle for Exploding {
        fn loss(&self, _: &[f64], _: &Assignment) -> f64 {
            0.0
        }
        fn subgradient(&self, _: &[f64], _: &Assignment, out: &mut [f64]) {
            out.fill(f64::NAN);
        }
    }

    #[test]
    fn non_finite_oracle_is_an_error() {
        let cfg = SgdConfig::with_schedule(1.0, 1.0, 0.1, 10, 0).unwrap();
        let mut src = ModelSource::new(WeightVector::zeros(2, 1.0));
        assert_eq!(run_sgd(&Exploding, &mut src, &cfg).unwrap_err(), SgdError::NonFinite { step: 1 });
    }

    #[test]
    fn empirical_source_checks_dimensions() {
        assert!(EmpiricalSource::new(&[]).is_err());
        let mixed = [Assignment::ones(2), Assignment::ones(3)];
        assert_eq!(
            EmpiricalSource::new(&mixed).unwrap_err(),
            SgdError::DimensionMismatch { expected: 2, got: 3 }
        );
    }

    #[test]
    fn invalid_configs() {
        assert!(SgdConfig::with_schedule(1.0, 1.0, 0.0, 10, 0).is_err());
        assert!(SgdConfig::with_schedule(1.0, 1.0, 0.1, 0, 0).is_err());
        assert!(SgdConfig::from_budget(-1.0, 1.0, 0.1, 0).is_err());
    }
}
