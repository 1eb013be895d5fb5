//! End-to-end runner behind `satdist learn`.
//!
//! 1. parse the function and draw `k` satisfying assignments (stream 0);
//! 2. split them 80/20 into training and validation sets, in draw order;
//! 3. run `⌈ln(1/δ)⌉` independent SGD trials on the training set, trial `i`
//!    on stream `1 + i`, each with `T = ⌈B²ρ²/ε²⌉` and `η = B/(ρ√T)`;
//! 4. keep the trial with the lowest validation log-loss;
//! 5. for `n ≤ 20`, score every trial exactly against `U_{f⁻¹(1)}` and
//!    measure the membership rule on the whole cube.
//!
//! The JSON report is a pure function of the configuration except for the
//! top-level `timing` object.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::boolfn::{self, Assignment, BoolFnError, BooleanFunction, Format, SatisfyingSampler};
use crate::membership::{self, ConfusionRecord, MembershipError, MembershipRule, Source};
use crate::metrics::{self, nats_to_bits, MetricsError};
use crate::model::{exact_distribution, DistributionTable, ModelError, SurrogateKind, SurrogateSpec, WeightVector};
use crate::rng::{stream_rng, DATA_STREAM, TRIAL_STREAM_BASE};
use crate::sgd::{self, EmpiricalSource, LogLoss, SgdConfig, SgdError, SgdTrace};

pub const REPORT_SCHEMA: &str = "satdist-report/1";
/// Exact metrics and the classifier sweep are computed up to this dimension.
pub const EXACT_METRICS_LIMIT: usize = 20;
pub const MIN_SAMPLES: usize = 5;
/// Slack on `ℓ₁ ≤ √(2·KL)` before a report is refused.
pub const PINSKER_SLACK: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("cannot parse function: {0}")]
    Parse(BoolFnError),
    #[error("function is unsatisfiable")]
    Unsatisfiable,
    #[error("sampling failed: {0}")]
    Sampling(BoolFnError),
    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl ExperimentError {
    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Config(_) | ExperimentError::Io { .. } | ExperimentError::Parse(_) => 2,
            ExperimentError::Unsatisfiable | ExperimentError::Sampling(_) => 3,
            ExperimentError::Numeric(_) => 4,
        }
    }
}

impl From<SgdError> for ExperimentError {
    fn from(e: SgdError) -> Self {
        match e {
            SgdError::InvalidConfig(msg) => ExperimentError::Config(msg),
            SgdError::Sampler(b) => ExperimentError::Sampling(b),
            other => ExperimentError::Numeric(other.to_string()),
        }
    }
}

impl From<MetricsError> for ExperimentError {
    fn from(e: MetricsError) -> Self {
        ExperimentError::Numeric(e.to_string())
    }
}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        ExperimentError::Numeric(e.to_string())
    }
}

impl From<MembershipError> for ExperimentError {
    fn from(e: MembershipError) -> Self {
        ExperimentError::Numeric(e.to_string())
    }
}

fn default_epsilon() -> f64 {
    0.1
}
fn default_delta() -> f64 {
    0.05
}
fn default_samples() -> usize {
    1000
}
fn default_format() -> Format {
    Format::Dimacs
}
fn default_surrogate() -> SurrogateKind {
    SurrogateKind::Softplus
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub function: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
    /// Dimension for `tt-hex` files with fewer than four table entries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tt_dim: Option<usize>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Ball radius `B`; defaults to 1.
    #[serde(default)]
    pub radius: Option<f64>,
    /// Lipschitz bound `ρ`; defaults to `2√n`.
    #[serde(default)]
    pub rho: Option<f64>,
    #[serde(default = "default_surrogate")]
    pub surrogate: SurrogateKind,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Membership tolerance `ε₁`; defaults to `epsilon`.
    #[serde(default)]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing)]
    pub out_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(function: impl Into<PathBuf>, format: Format) -> Self {
        ExperimentConfig {
            function: function.into(),
            format,
            tt_dim: None,
            epsilon: default_epsilon(),
            delta: default_delta(),
            radius: None,
            rho: None,
            surrogate: default_surrogate(),
            samples: default_samples(),
            seed: 0,
            eps1: None,
            out_dir: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self, ExperimentError> {
        serde_json::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |msg: String| Err(ExperimentError::Config(msg));
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if self.samples < MIN_SAMPLES {
            return bad(format!("need at least {MIN_SAMPLES} samples to split, got {}", self.samples));
        }
        for (name, v) in [("radius", self.radius), ("rho", self.rho)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return bad(format!("{name} must be positive, got {v}"));
                }
            }
        }
        if let Some(e) = self.eps1 {
            if !(e >= 0.0 && e.is_finite()) {
                return bad(format!("eps1 must be non-negative, got {e}"));
            }
        }
        Ok(())
    }
}

/// `max(1, ⌈ln(1/δ)⌉)`.
pub fn num_trials(delta: f64) -> Result<usize, ExperimentError> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(ExperimentError::Config(format!("delta must lie in (0, 1), got {delta}")));
    }
    Ok(((1.0 / delta).ln().ceil() as usize).max(1))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExactMetrics {
    pub kl: f64,
    pub kl_bits: f64,
    pub l1: f64,
    pub pinsker_bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub stream: u64,
    pub weights: Vec<f64>,
    pub train_risk: f64,
    pub validation_risk: f64,
    pub steps: u64,
    /// `None` when `n` is above the exact-metrics limit.
    pub exact: Option<ExactMetrics>,
    pub membership_b: f64,
    pub confusion: Option<ConfusionRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub parse_ms: f64,
    pub sample_ms: f64,
    pub train_ms: f64,
    pub metrics_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LearnReport {
    pub schema: &'static str,
    pub config: ExperimentConfig,
    pub n: usize,
    pub radius: f64,
    pub rho: f64,
    pub eps1: f64,
    pub num_trials: usize,
    pub iterations_per_trial: u64,
    pub step_size: f64,
    pub total_steps: u64,
    pub train_size: usize,
    pub validation_size: usize,
    /// `|f⁻¹(1)|` when it was enumerated.
    pub satisfying_count: Option<u64>,
    /// Entropy of `U_{f⁻¹(1)}` in nats, when enumerated.
    pub target_entropy: Option<f64>,
    pub trials: Vec<TrialReport>,
    pub selected: usize,
    pub timing: Timing,
}

impl LearnReport {
    pub fn selected_trial(&self) -> &TrialReport {
        &self.trials[self.selected]
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Report plus the per-trial SGD traces.
#[derive(Debug, Clone)]
pub struct LearnOutcome {
    pub report: LearnReport,
    pub traces: Vec<SgdTrace>,
}

fn ms_since(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1e3
}

pub fn load_function(path: &Path, format: Format, tt_dim: Option<usize>) -> Result<BooleanFunction, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io { path: path.to_path_buf(), source })?;
    let parsed = match (format, tt_dim) {
        (Format::TruthTableHex, Some(n)) => boolfn::parse_truth_table_hex(&text, Some(n)),
        _ => boolfn::parse_function(&text, format),
    };
    parsed.map_err(ExperimentError::Parse)
}

/// Reads the function file named in `cfg` and runs the pipeline.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<LearnOutcome, ExperimentError> {
    cfg.validate()?;
    let start = Instant::now();
    let f = load_function(&cfg.function, cfg.format, cfg.tt_dim)?;
    let parse_ms = ms_since(start);
    run_on_function(cfg, &f, parse_ms)
}

pub fn run_on_function(cfg: &ExperimentConfig, f: &BooleanFunction, parse_ms: f64) -> Result<LearnOutcome, ExperimentError> {
    cfg.validate()?;
    let n = f.n();
    let radius = cfg.radius.unwrap_or(WeightVector::DEFAULT_RADIUS);
    let rho = cfg.rho.unwrap_or(2.0 * (n.max(1) as f64).sqrt());
    let eps1 = cfg.eps1.unwrap_or(cfg.epsilon);
    let g = SurrogateSpec::new(cfg.surrogate);
    let trials = num_trials(cfg.delta)?;
    let iterations = sgd::iteration_budget(radius, rho, cfg.epsilon)?;
    let step = sgd::step_size(radius, rho, iterations)?;

    // samples
    let t_sample = Instant::now();
    let sampler = SatisfyingSampler::new(f).map_err(|e| match e {
        BoolFnError::Unsatisfiable => ExperimentError::Unsatisfiable,
        other => ExperimentError::Sampling(other),
    })?;
    let mut data_rng = stream_rng(cfg.seed, DATA_STREAM);
    let sample = (0..cfg.samples)
        .map(|_| sampler.sample(&mut data_rng))
        .collect::<Result<Vec<Assignment>, _>>()
        .map_err(|e| match e {
            BoolFnError::Unsatisfiable => ExperimentError::Unsatisfiable,
            other => ExperimentError::Sampling(other),
        })?;
    let split = cfg.samples * 4 / 5;
    let (train, validation) = sample.split_at(split);
    let sample_ms = ms_since(t_sample);

    // training
    let t_train = Instant::now();
    let runs = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(SgdTrace, f64, f64), ExperimentError> {
            let config = SgdConfig {
                radius,
                rho,
                epsilon: cfg.epsilon,
                iterations,
                step,
                seed: cfg.seed,
                stream: TRIAL_STREAM_BASE + i as u64,
                record_risk: true,
            };
            let mut source = EmpiricalSource::new(train)?;
            let trace = sgd::run_sgd(&LogLoss, &mut source, &config)?;
            let train_risk = metrics::empirical_risk(&trace.averaged, train)?;
            let validation_risk = metrics::empirical_risk(&trace.averaged, validation)?;
            Ok((trace, train_risk, validation_risk))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let train_ms = ms_since(t_train);

    let selected = runs
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| a.2.total_cmp(&b.2))
        .map(|(i, _)| i)
        .expect("at least one trial");

    // exact metrics
    let t_metrics = Instant::now();
    let target = if n <= EXACT_METRICS_LIMIT {
        let set = boolfn::enumerate_satisfying(f).map_err(ExperimentError::Parse)?;
        Some(DistributionTable::uniform_over(&set)?)
    } else {
        None
    };
    let satisfying_count = match &sampler {
        boolfn::SatisfyingSampler::Enumerated(set) => Some(set.len() as u64),
        boolfn::SatisfyingSampler::Rejection(_) => None,
    };

    let mut trial_reports = Vec::with_capacity(trials);
    for (i, (trace, train_risk, validation_risk)) in runs.iter().enumerate() {
        let wbar = &trace.averaged;
        let (exact, b, confusion) = match &target {
            Some(p) => {
                let q = exact_distribution(wbar, n)?;
                let kl = metrics::exact_kl(p, &q)?;
                let l1 = metrics::l1_distance(p, &q)?;
                let pinsker_bound = metrics::pinsker_bound(kl)?;
                if l1 > pinsker_bound + PINSKER_SLACK {
                    return Err(ExperimentError::Numeric(format!(
                        "trial {i}: l1 {l1} exceeds Pinsker bound {pinsker_bound}"
                    )));
                }
                let b = membership::estimate_b(&g, wbar, Source::Table(p))?;
                let rule = MembershipRule::new(g, wbar.clone(), b, eps1)?;
                let confusion = membership::evaluate_classifier(&rule, f)?;
                (Some(ExactMetrics { kl, kl_bits: nats_to_bits(kl), l1, pinsker_bound }), b, Some(confusion))
            }
            None => (None, membership::estimate_b(&g, wbar, Source::Samples(train))?, None),
        };
        trial_reports.push(TrialReport {
            trial: i,
            seed: cfg.seed,
            stream: TRIAL_STREAM_BASE + i as u64,
            weights: wbar.as_slice().to_vec(),
            train_risk: *train_risk,
            validation_risk: *validation_risk,
            steps: trace.steps,
            exact,
            membership_b: b,
            confusion,
        });
    }
    let metrics_ms = ms_since(t_metrics);

    let report = LearnReport {
        schema: REPORT_SCHEMA,
        config: cfg.clone(),
        n,
        radius,
        rho,
        eps1,
        num_trials: trials,
        iterations_per_trial: iterations,
        step_size: step,
        total_steps: runs.iter().map(|r| r.0.steps).sum(),
        train_size: train.len(),
        validation_size: validation.len(),
        satisfying_count,
        target_entropy: target.as_ref().map(metrics::entropy),
        trials: trial_reports,
        selected,
        timing: Timing { parse_ms, sample_ms, train_ms, metrics_ms },
    };
    Ok(LearnOutcome { report, traces: runs.into_iter().map(|r| r.0).collect() })
}

/// Writes `report.json`, `weights.txt` (selected trial) and
/// `trace_trial_<i>.csv` for every trial into `dir`.
pub fn write_outputs(outcome: &LearnOutcome, dir: &Path) -> Result<(), ExperimentError> {
    let io_err = |path: PathBuf| move |source| ExperimentError::Io { path, source };
    fs::create_dir_all(dir).map_err(io_err(dir.to_path_buf()))?;
    let write = |name: String, contents: String| {
        let path = dir.join(name);
        fs::write(&path, contents).map_err(io_err(path))
    };
    write("report.json".into(), outcome.report.to_json())?;
    let selected = outcome.report.selected;
    write("weights.txt".into(), outcome.traces[selected].averaged.to_text())?;
    for (i, trace) in outcome.traces.iter().enumerate() {
        write(format!("trace_trial_{i}.csv"), trace.to_csv())?;
    }
    Ok(())
}
