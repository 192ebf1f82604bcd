//! Counter-addressed random streams.
//!
//! Path `p` of shard `s` reads ChaCha8 stream number `s·2⁴⁰ + p` under the
//! run seed, so every draw is a pure function of `(seed, shard, path)` and
//! independent of how shards are scheduled onto threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Gamma, StandardNormal};

/// Paths per shard are addressed below this bit.
pub const SHARD_SHIFT: u32 = 40;

pub fn substream_index(shard: u64, path: u64) -> u64 {
    debug_assert!(path < 1 << SHARD_SHIFT);
    (shard << SHARD_SHIFT) | path
}

/// Random source for a single Monte-Carlo path.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    shard: u64,
    path: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, shard: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(substream_index(shard, path));
        Self { seed, shard, path, rng }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn shard(&self) -> u64 {
        self.shard
    }

    pub fn path(&self) -> u64 {
        self.path
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open0(&mut self) -> f64 {
        1.0 - self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// `Gamma(shape, 1)`; shape 0 is the point mass at 0.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        debug_assert!(shape >= 0.0);
        if shape == 0.0 {
            return 0.0;
        }
        let law = Gamma::new(shape, 1.0).expect("positive finite shape");
        self.rng.sample(law)
    }

    /// `χ²` with `dof` degrees of freedom, i.e. `Gamma(dof/2, 2)`.
    pub fn chi_squared(&mut self, dof: f64) -> f64 {
        2.0 * self.gamma(0.5 * dof)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(samples: &[f64]) -> (f64, f64) {
        let n = samples.len() as f64;
        let mean = samples.iter().sum::<f64>() / n;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let draw = |path| {
            let mut s = RngStream::new(7, 1, path);
            (0..5).map(|_| s.normal()).collect::<Vec<_>>()
        };
        let (a, b, c) = (draw(3), draw(3), draw(4));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(substream_index(2, 5), (2 << 40) + 5);
    }

    #[test]
    fn gamma_moments() {
        for &shape in &[0.25, 0.5, 1.0, 1.5, 3.0, 10.0] {
            let mut s = RngStream::new(11, 0, 0);
            let xs: Vec<f64> = (0..200_000).map(|_| s.gamma(shape)).collect();
            let (m, v) = moments(&xs);
            let se_mean = (shape / xs.len() as f64).sqrt();
            assert!((m - shape).abs() < 4.0 * se_mean, "shape {shape}: mean {m}");
            // Var of the sample variance ≈ (μ4 − σ⁴)/n with μ4 = 3k² + 6k.
            let se_var = ((3.0 * shape * shape + 6.0 * shape - shape * shape) / xs.len() as f64).sqrt();
            assert!((v - shape).abs() < 4.0 * se_var, "shape {shape}: var {v}");
            assert!(xs.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn gamma_shape_zero_is_point_mass() {
        let mut s = RngStream::new(1, 0, 0);
        assert!((0..100).all(|_| s.gamma(0.0) == 0.0));
    }
}
