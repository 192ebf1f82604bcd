//! Sharded, reproducible Monte-Carlo engine.
//!
//! Paths are split into `shards` contiguous blocks. Shard `s` owns paths
//! `0..n_s` of its own substream family, accumulates running moments, and
//! the shard results are merged pairwise in a fixed tree order. The result
//! is therefore a pure function of `(seed, shards, paths)` regardless of the
//! number of worker threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SmoothnessRule;
use crate::rng::RngStream;
use crate::sampler::Method;

/// Which clock `(t, x)` are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Clock {
    /// CIR time: estimates `E f(X_t(x))`.
    #[default]
    Cir,
    /// BESQ time: estimates `E f(Y^δ_t(x))`.
    Besq,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub paths: u64,
    pub seed: u64,
    pub shards: u64,
    pub clock: Clock,
    pub smoothness: SmoothnessRule,
}

impl EstimatorConfig {
    pub const DEFAULT_SHARDS: u64 = 8;

    pub fn new(paths: u64, seed: u64) -> Self {
        Self {
            method: Method::Gamma,
            paths,
            seed,
            shards: Self::DEFAULT_SHARDS,
            clock: Clock::Cir,
            smoothness: SmoothnessRule::Standard,
        }
    }

    pub fn with_method(self, method: Method) -> Self {
        Self { method, ..self }
    }

    pub fn with_shards(self, shards: u64) -> Self {
        Self { shards, ..self }
    }

    pub fn with_clock(self, clock: Clock) -> Self {
        Self { clock, ..self }
    }

    pub fn with_smoothness(self, smoothness: SmoothnessRule) -> Self {
        Self { smoothness, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.paths < 2 {
            return Err(Error::InvalidArgument(format!("paths must be >= 2, got {}", self.paths)));
        }
        if self.shards == 0 {
            return Err(Error::InvalidArgument("shards must be >= 1".into()));
        }
        Ok(())
    }

    /// Number of paths owned by `shard`.
    pub fn shard_len(&self, shard: u64) -> u64 {
        let base = self.paths / self.shards;
        base + u64::from(shard < self.paths % self.shards)
    }
}

/// Mean and standard error of a Monte-Carlo average.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub stderr: f64,
    pub paths: u64,
    pub seed: u64,
    pub shards: u64,
}

impl McEstimate {
    /// An exact value reported as an estimate with zero error.
    pub fn exact(value: f64, cfg: &EstimatorConfig) -> Self {
        Self { mean: value, stderr: 0.0, paths: cfg.paths, seed: cfg.seed, shards: cfg.shards }
    }

    fn from_moments(m: &Moments, col: usize, cfg: &EstimatorConfig) -> Self {
        Self { mean: m.mean[col], stderr: m.stderr(col), paths: m.n, seed: cfg.seed, shards: cfg.shards }
    }
}

/// Running means and centred second moments of several columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Moments {
    pub fn new(cols: usize) -> Self {
        Self { n: 0, mean: vec![0.0; cols], m2: vec![0.0; cols] }
    }

    pub fn push(&mut self, values: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((m, s), &v) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(values) {
            let d = v - *m;
            *m += d / n;
            *s += d * (v - *m);
        }
    }

    /// Chan et al. pairwise combination.
    pub fn merge(&self, other: &Self) -> Self {
        if self.n == 0 {
            return other.clone();
        }
        if other.n == 0 {
            return self.clone();
        }
        let (na, nb) = (self.n as f64, other.n as f64);
        let n = na + nb;
        let mut out = Self::new(self.mean.len());
        out.n = self.n + other.n;
        for c in 0..self.mean.len() {
            let d = other.mean[c] - self.mean[c];
            out.mean[c] = self.mean[c] + d * nb / n;
            out.m2[c] = self.m2[c] + other.m2[c] + d * d * na * nb / n;
        }
        out
    }

    /// Unbiased sample variance of column `col`.
    pub fn variance(&self, col: usize) -> f64 {
        if self.n < 2 {
            return 0.0;
        }
        (self.m2[col] / (self.n - 1) as f64).max(0.0)
    }

    pub fn stderr(&self, col: usize) -> f64 {
        (self.variance(col) / self.n as f64).sqrt()
    }

    pub fn estimate(&self, col: usize, cfg: &EstimatorConfig) -> McEstimate {
        McEstimate::from_moments(self, col, cfg)
    }
}

fn merge_tree(mut level: Vec<Moments>) -> Moments {
    while level.len() > 1 {
        level = level
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => a.merge(b),
                [a] => a.clone(),
                _ => unreachable!(),
            })
            .collect();
    }
    level.pop().expect("at least one shard")
}

/// Runs `body` once per shard in parallel and returns the results in shard order.
pub fn map_shards<T: Send>(cfg: &EstimatorConfig, body: impl Fn(u64, u64) -> T + Sync) -> Vec<T> {
    (0..cfg.shards).into_par_iter().map(|s| body(s, cfg.shard_len(s))).collect()
}

/// Evaluates `cols` per-path statistics for every path and returns their merged moments.
///
/// `init` builds per-shard scratch state; `body` fills one row of outputs
/// from the path's random stream.
pub fn run_paths<S>(
    cfg: &EstimatorConfig,
    cols: usize,
    init: impl Fn() -> S + Sync,
    body: impl Fn(&mut S, &mut RngStream, &mut [f64]) + Sync,
) -> Result<Moments> {
    cfg.validate()?;
    let shards = map_shards(cfg, |shard, len| {
        let mut state = init();
        let mut row = vec![0.0; cols];
        let mut acc = Moments::new(cols);
        for path in 0..len {
            let mut stream = RngStream::new(cfg.seed, shard, path);
            body(&mut state, &mut stream, &mut row);
            acc.push(&row);
        }
        acc
    });
    let merged = merge_tree(shards);
    if let Some(bad) = merged.mean.iter().find(|m| !m.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite Monte-Carlo mean {bad}")));
    }
    Ok(merged)
}
