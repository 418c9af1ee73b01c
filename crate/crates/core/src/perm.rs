//! Monte-Carlo permutation test on the coincidence statistic.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{arg, Result};
use crate::rng::{domain, Streams};
use crate::train::{count_sorted, Sample, TrialPair};

#[derive(Debug, Clone, PartialEq)]
pub struct TestConfig {
    pub alpha: f64,
    pub delta: f64,
    pub b: usize,
    pub seed: u64,
}

impl TestConfig {
    pub fn new(alpha: f64, delta: f64, b: usize, seed: u64) -> Result<Self> {
        let cfg = TestConfig {
            alpha,
            delta,
            b,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return arg(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.delta >= 0.0) {
            return arg(format!("delta must be non-negative, got {}", self.delta));
        }
        if self.b == 0 {
            return arg("B must be at least 1");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub quantile: f64,
    pub p_value: f64,
    pub reject: bool,
    pub permuted_statistics: Option<Vec<f64>>,
}

/// Coincidence counts between every first coordinate and every second coordinate.
///
/// Entry `(i, j)` is φ(X_i¹, X_j²). Once built, the statistic of any permuted
/// sample costs O(n).
#[derive(Debug, Clone)]
pub struct PhiMatrix {
    n: usize,
    data: Vec<u64>,
}

impl PhiMatrix {
    pub fn new(sample: &Sample, delta: f64) -> Result<Self> {
        if !(delta >= 0.0) {
            return arg(format!("delta must be non-negative, got {delta}"));
        }
        let trials = sample.trials();
        let n = trials.len();
        let mut data = Vec::with_capacity(n * n);
        for pi in trials {
            for pj in trials {
                data.push(count_sorted(pi.x1.times(), pj.x2.times(), delta));
            }
        }
        Ok(PhiMatrix { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> u64 {
        self.data[i * self.n + j]
    }

    /// Σ_i φ(X_i¹, X_{π(i)}²).
    pub fn permuted_sum(&self, pi: &[usize]) -> u64 {
        pi.iter()
            .enumerate()
            .map(|(i, &j)| self.data[i * self.n + j])
            .sum()
    }

    pub fn diagonal_sum(&self) -> u64 {
        (0..self.n).map(|i| self.data[i * self.n + i]).sum()
    }

    /// C_n of the sample permuted by `pi`.
    pub fn c_permuted(&self, pi: &[usize]) -> f64 {
        self.permuted_sum(pi) as f64 / self.n as f64
    }

    pub fn c_observed(&self) -> f64 {
        self.diagonal_sum() as f64 / self.n as f64
    }

    /// Σ_{i,j} φ(X_i¹, X_j²), invariant under permutation.
    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }
}

fn check_bijection(pi: &[usize], n: usize) -> Result<()> {
    if pi.len() != n {
        return arg(format!("permutation has length {}, expected {n}", pi.len()));
    }
    let mut seen = vec![false; n];
    for &j in pi {
        if j >= n || std::mem::replace(&mut seen[j], true) {
            return arg("permutation is not a bijection");
        }
    }
    Ok(())
}

/// Trial `i` of the result is `(X_i¹, X_{π(i)}²)`. Indices are zero-based.
pub fn permute_sample(sample: &Sample, pi: &[usize]) -> Result<Sample> {
    let trials = sample.trials();
    check_bijection(pi, trials.len())?;
    let out = trials
        .iter()
        .zip(pi)
        .map(|(p, &j)| TrialPair {
            x1: p.x1.clone(),
            x2: trials[j].x2.clone(),
        })
        .collect();
    Sample::new(out)
}

/// Draws permutation `k` of size `n` from `streams`.
pub fn draw_permutation(streams: &Streams, k: u64, n: usize) -> Vec<usize> {
    let mut pi: Vec<usize> = (0..n).collect();
    pi.shuffle(&mut streams.at(&[domain::PERMUTATION, k]));
    pi
}

fn null_from_matrix(phi: &PhiMatrix, b: usize, streams: &Streams) -> Vec<f64> {
    (0..b)
        .into_par_iter()
        .with_min_len(32)
        .map(|k| phi.c_permuted(&draw_permutation(streams, k as u64, phi.n())))
        .collect()
}

/// B permuted statistics C_n(𝕏^{π_k}), ordered by `k`.
pub fn mc_null(sample: &Sample, delta: f64, b: usize, streams: &Streams) -> Result<Vec<f64>> {
    let phi = PhiMatrix::new(sample, delta)?;
    Ok(null_from_matrix(&phi, b, streams))
}

/// Exact permutation law by enumerating all n! permutations (Heap's algorithm).
pub fn exact_null(sample: &Sample, delta: f64) -> Result<Vec<f64>> {
    let n = sample.n();
    if n > 8 {
        return arg(format!("exact enumeration is limited to n <= 8, got {n}"));
    }
    let phi = PhiMatrix::new(sample, delta)?;
    let mut pi: Vec<usize> = (0..n).collect();
    let mut c = vec![0usize; n];
    let mut out = vec![phi.c_permuted(&pi)];
    let mut i = 0;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                pi.swap(0, i);
            } else {
                pi.swap(c[i], i);
            }
            out.push(phi.c_permuted(&pi));
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    Ok(out)
}

/// Rank of the (1 − α) quantile among `m` values, 1-based.
pub fn quantile_rank(alpha: f64, m: usize) -> usize {
    let x = (1.0 - alpha) * m as f64;
    let k = (x - 1e-9 * m as f64).ceil() as usize;
    k.clamp(1, m)
}

/// Decision from an observed statistic and its Monte-Carlo null.
pub fn decide(statistic: f64, null: &[f64], alpha: f64) -> (f64, f64, bool) {
    let mut all = Vec::with_capacity(null.len() + 1);
    all.push(statistic);
    all.extend_from_slice(null);
    all.sort_by(f64::total_cmp);
    let quantile = all[quantile_rank(alpha, all.len()) - 1];
    let exceed = null.iter().filter(|&&v| v >= statistic).count();
    let p_value = (1 + exceed) as f64 / (null.len() + 1) as f64;
    (quantile, p_value, statistic > quantile)
}

/// Runs the test with permutations drawn from `streams`.
pub fn permutation_test_with(
    sample: &Sample,
    cfg: &TestConfig,
    streams: &Streams,
    keep_null: bool,
) -> Result<TestResult> {
    cfg.validate()?;
    if sample.n() < 2 {
        return arg(format!("the test needs n >= 2, got {}", sample.n()));
    }
    let phi = PhiMatrix::new(sample, cfg.delta)?;
    let statistic = phi.c_observed();
    let null = null_from_matrix(&phi, cfg.b, streams);
    let (quantile, p_value, reject) = decide(statistic, &null, cfg.alpha);
    Ok(TestResult {
        statistic,
        quantile,
        p_value,
        reject,
        permuted_statistics: keep_null.then_some(null),
    })
}

/// Runs the test with permutations keyed by `cfg.seed`.
pub fn permutation_test(sample: &Sample, cfg: &TestConfig) -> Result<TestResult> {
    permutation_test_with(sample, cfg, &Streams::new(cfg.seed), true)
}
