//! Expectations against the exact transition density, by adaptive quadrature.
//!
//! `Y^δ_τ(x)` has density
//! `p(y) = (1/2τ)(y/x)^{ν/2} exp(−(x+y)/2τ) I_ν(√(xy)/τ)` with `ν = δ/2 − 1`,
//! and `Gamma(δ/2, 2τ)` at `x = 0`. After `y = w²` the integrand is smooth
//! in `w` on `[0, ∞)`.

use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::bessel::ln_bessel_ive;
use crate::error::{Error, Result};
use crate::model::CirParams;
use crate::quadrature::{integrate_adaptive, AdaptiveConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// The integration range is cut where the Gaussian tail factor falls below `e^{−tail_log}`.
    pub tail_log: f64,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self { abs_tol: 1e-14, rel_tol: 1e-13, max_intervals: 4000, tail_log: 120.0 }
    }
}

/// `ln p(y)` for `BESQ^δ_τ(x)`.
pub fn besq_log_density(delta: f64, tau: f64, x: f64, y: f64) -> f64 {
    if y <= 0.0 {
        return if delta < 2.0 && x == 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
    }
    if x == 0.0 {
        let k = 0.5 * delta;
        return (k - 1.0) * y.ln() - y / (2.0 * tau) - ln_gamma(k) - k * (2.0 * tau).ln();
    }
    let nu = 0.5 * delta - 1.0;
    let z = (x * y).sqrt() / tau;
    let gap = x.sqrt() - y.sqrt();
    -(2.0 * tau).ln() + 0.5 * nu * (y / x).ln() - gap * gap / (2.0 * tau) + ln_bessel_ive(nu, z)
}

/// `E g(Y^δ_τ(x))` by quadrature in `w = √y`.
pub fn besq_expectation(
    delta: f64,
    tau: f64,
    x: f64,
    cfg: &QuadConfig,
    g: impl Fn(f64) -> f64,
) -> Result<f64> {
    if !(tau > 0.0) || !(x >= 0.0) {
        return Err(Error::InvalidArgument(format!("density needs tau > 0 and x >= 0, got tau={tau}, x={x}")));
    }
    let root = x.sqrt();
    let spread = tau.sqrt();
    let w_max = root + (2.0 * tau * cfg.tail_log).sqrt() + spread * (delta + 4.0).sqrt();
    let mut breaks = vec![0.0, w_max];
    for k in -6..=10 {
        let w = root + k as f64 * spread;
        if w > 0.0 && w < w_max {
            breaks.push(w);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let adaptive = AdaptiveConfig {
        abs_tol: cfg.abs_tol,
        rel_tol: cfg.rel_tol,
        max_intervals: cfg.max_intervals,
    };
    let (value, _) = integrate_adaptive(&breaks, adaptive, |w| {
        if w <= 0.0 {
            return 0.0;
        }
        let y = w * w;
        let lp = besq_log_density(delta, tau, x, y);
        if lp == f64::NEG_INFINITY {
            return 0.0;
        }
        2.0 * w * lp.exp() * g(y)
    })?;
    Ok(value)
}

/// `E f(X_t(x))` against the CIR transition density.
pub fn density_u(
    f: impl Fn(f64) -> f64,
    params: &CirParams,
    t: f64,
    x: f64,
    cfg: &QuadConfig,
) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("density oracle needs t > 0, got {t}")));
    }
    let (tau, scale) = params.time_transform(t);
    besq_expectation(params.delta, tau, x, cfg, |y| f(scale * y))
}
