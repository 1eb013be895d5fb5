#![allow(dead_code)]

use rand::Rng;
use satdist::boolfn::{self, Assignment, BooleanFunction};
use satdist::metrics;
use satdist::model::DistributionTable;
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// KL and ℓ₁ of a pair, asserting Pinsker's inequality on the way.
/// Every distribution pair built by the integration tests goes through here.
pub fn checked_divergences(p: &DistributionTable, q: &DistributionTable) -> (f64, f64) {
    let kl = metrics::exact_kl(p, q).expect("support");
    let l1 = metrics::l1_distance(p, q).expect("dims");
    let bound = metrics::pinsker_bound(kl).unwrap();
    assert!(l1 <= bound + 1e-12, "Pinsker violated: l1 {l1} > sqrt(2 KL) {bound}");
    (kl, l1)
}

/// Central differences of a scalar function of a vector.
pub fn central_difference<F: Fn(&[f64]) -> f64>(f: F, at: &[f64], h: f64) -> Vec<f64> {
    let mut x = at.to_vec();
    (0..at.len())
        .map(|i| {
            let orig = x[i];
            x[i] = orig + h;
            let up = f(&x);
            x[i] = orig - h;
            let down = f(&x);
            x[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// `max_i |a_i − b_i| / max(1, max_i |b_i|)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max) / scale
}

pub fn random_table<R: Rng>(n: usize, rng: &mut R, sparsity: f64) -> DistributionTable {
    loop {
        let w: Vec<f64> = (0..1usize << n)
            .map(|_| if rng.gen_bool(sparsity) { 0.0 } else { rng.gen::<f64>() })
            .collect();
        if w.iter().any(|&v| v > 0.0) {
            return DistributionTable::from_weights(n, w).unwrap();
        }
    }
}

pub fn random_ball_vector<R: Rng>(n: usize, radius: f64, rng: &mut R) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let r = radius * rng.gen::<f64>();
    if norm == 0.0 { v } else { v.iter().map(|x| x * r / norm).collect() }
}

pub fn random_satisfiable_cnf<R: Rng>(n: usize, clauses: usize, width: usize, rng: &mut R) -> BooleanFunction {
    loop {
        let f = boolfn::random_cnf(n, clauses, width, rng);
        if !boolfn::enumerate_satisfying(&f).unwrap().is_empty() {
            return f;
        }
    }
}

pub struct ChiSquareOutcome {
    pub statistic: f64,
    pub critical: f64,
    pub cells: usize,
}

impl ChiSquareOutcome {
    pub fn passes(&self) -> bool {
        self.statistic <= self.critical
    }
}

/// Pearson goodness-of-fit of `draws` against the uniform distribution on
/// `support`, at significance `alpha`.
pub fn chi_square_uniform(support: &[Assignment], draws: &[Assignment], alpha: f64) -> ChiSquareOutcome {
    let mut counts = vec![0u64; support.len()];
    for x in draws {
        let pos = support.binary_search(x).expect("draw outside support");
        counts[pos] += 1;
    }
    let expected = draws.len() as f64 / support.len() as f64;
    let statistic = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let cells = support.len();
    let critical = if cells > 1 {
        ChiSquared::new((cells - 1) as f64).unwrap().inverse_cdf(1.0 - alpha)
    } else {
        0.0
    };
    ChiSquareOutcome { statistic, critical, cells }
}
