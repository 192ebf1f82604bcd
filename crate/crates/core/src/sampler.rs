//! Exact marginal sampling of `BESQ^δ_τ(x)` and `X_t(x)` in the decomposed
//! form `(√x + a)² + b`.
//!
//! Every representation first draws a time-free [`UnitDraw`] `(ξ, b₁)` and
//! then sets `a = ξ√τ`, `b = b₁·τ`. Because both pieces scale exactly in `τ`
//! (normal variance and gamma scale are linear in time), one unit draw can
//! be reused across several times and starting points, which is what the
//! common-random-number checks rely on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::CirParams;
use crate::rng::RngStream;

/// Which exact representation of the BESQ marginal to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// `a = ξ√τ`, `b ~ Gamma((δ−1)/2, 2τ)` (BESQ additivity).
    #[default]
    Gamma,
    /// Affine combination `λ₁Ỹⁿ + λ₂Ŷⁿ⁺¹` of independent integer-dimension draws.
    Mix,
    /// Literal sum of `⌊δ⌋−1` squared normals, plus a gamma draw for the
    /// fractional part of `δ`.
    Squares,
}

pub(crate) fn is_integer(delta: f64) -> bool {
    (delta - delta.round()).abs() <= 1e-12 * delta.abs().max(1.0)
}

/// `n < δ < n+1` with weights `λ₁ = n+1−δ`, `λ₂ = δ−n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureSplit {
    pub n: u32,
    pub lambda1: f64,
    pub lambda2: f64,
}

impl MixtureSplit {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta >= 1.0) {
            return Err(Error::DimensionTooSmall(delta));
        }
        if is_integer(delta) {
            return Err(Error::AffineMixOnInteger(delta));
        }
        let n = delta.floor();
        Ok(Self { n: n as u32, lambda1: n + 1.0 - delta, lambda2: delta - n })
    }
}

/// A BESQ draw `value = (√x + a)² + b`.
///
/// `xi` is the weight with `a = xi·√τ`. It is a standard normal for the gamma
/// and squares representations; for the affine mixture it is
/// `λ₁ξ̃ + λ₂ξ̂`, whose variance is `λ₁² + λ₂²`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecomposedSample {
    pub xi: f64,
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

/// The time-free part of a draw: `a = xi·√τ`, `b = b_unit·τ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitDraw {
    pub xi: f64,
    pub b_unit: f64,
}

impl UnitDraw {
    pub fn at(&self, tau: f64, x: f64) -> DecomposedSample {
        if tau == 0.0 {
            return DecomposedSample { xi: self.xi, a: 0.0, b: 0.0, value: x };
        }
        let a = self.xi * tau.sqrt();
        let b = self.b_unit * tau;
        let root = x.sqrt() + a;
        DecomposedSample { xi: self.xi, a, b, value: root * root + b }
    }

    /// The reflected draw `ξ ↦ −ξ`, which has the same law.
    pub fn reflected(&self) -> Self {
        Self { xi: -self.xi, ..*self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Repr {
    Gamma { shape: f64 },
    Squares { squares: u32, shape: f64 },
    Mix { split: MixtureSplit },
}

/// A prepared sampler for one dimension and representation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesqSampler {
    delta: f64,
    method: Method,
    repr: Repr,
}

impl BesqSampler {
    pub fn new(delta: f64, method: Method) -> Result<Self> {
        if !(delta >= 1.0) || !delta.is_finite() {
            return Err(Error::DimensionTooSmall(delta));
        }
        let repr = match method {
            Method::Gamma => Repr::Gamma { shape: 0.5 * (delta - 1.0) },
            Method::Squares => {
                let n = if is_integer(delta) { delta.round() } else { delta.floor() };
                Repr::Squares { squares: n as u32 - 1, shape: 0.5 * (delta - n).max(0.0) }
            }
            Method::Mix => Repr::Mix { split: MixtureSplit::new(delta)? },
        };
        Ok(Self { delta, method, repr })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn mixture(&self) -> Option<MixtureSplit> {
        match self.repr {
            Repr::Mix { split } => Some(split),
            _ => None,
        }
    }

    /// Draws `(ξ, b₁)`. The order of reads from `rng` is fixed per representation.
    pub fn draw_unit(&self, rng: &mut RngStream) -> UnitDraw {
        match self.repr {
            Repr::Gamma { shape } => {
                let xi = rng.normal();
                UnitDraw { xi, b_unit: 2.0 * rng.gamma(shape) }
            }
            Repr::Squares { squares, shape } => {
                let xi = rng.normal();
                let mut b = 0.0;
                for _ in 0..squares {
                    let z = rng.normal();
                    b += z * z;
                }
                if shape > 0.0 {
                    b += 2.0 * rng.gamma(shape);
                }
                UnitDraw { xi, b_unit: b }
            }
            Repr::Mix { split } => {
                let (l1, l2) = (split.lambda1, split.lambda2);
                let n = f64::from(split.n);
                let xi_lo = rng.normal();
                let xi_hi = rng.normal();
                let b_lo = 2.0 * rng.gamma(0.5 * (n - 1.0));
                let b_hi = 2.0 * rng.gamma(0.5 * n);
                let diff = xi_lo - xi_hi;
                UnitDraw {
                    xi: l1 * xi_lo + l2 * xi_hi,
                    b_unit: l1 * l2 * diff * diff + l1 * b_lo + l2 * b_hi,
                }
            }
        }
    }

    pub fn sample(&self, tau: f64, x: f64, rng: &mut RngStream) -> DecomposedSample {
        self.draw_unit(rng).at(tau, x)
    }
}

fn check_time_space(t: f64, x: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("time must be finite and >= 0, got {t}")));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("x must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// `BESQⁿ_t(x)` for integer `n ≥ 1` with `b ~ Gamma((n−1)/2, 2t)`.
pub fn sample_besq_int(n: u32, t: f64, x: f64, stream: &mut RngStream) -> Result<DecomposedSample> {
    if n == 0 {
        return Err(Error::DimensionTooSmall(0.0));
    }
    check_time_space(t, x)?;
    Ok(BesqSampler::new(f64::from(n), Method::Gamma)?.sample(t, x, stream))
}

/// `BESQ^δ_t(x)` for real `δ ≥ 1`.
pub fn sample_besq(
    delta: f64,
    t: f64,
    x: f64,
    stream: &mut RngStream,
    method: Method,
) -> Result<DecomposedSample> {
    check_time_space(t, x)?;
    Ok(BesqSampler::new(delta, method)?.sample(t, x, stream))
}

/// A CIR marginal `value = scale · besq.value`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CirSample {
    pub value: f64,
    pub besq: DecomposedSample,
    pub scale: f64,
}

/// `X_t(x) = e^{−θt}·Y^δ_{φ(t)}(x)`.
pub fn sample_cir(
    params: &CirParams,
    t: f64,
    x: f64,
    stream: &mut RngStream,
    method: Method,
) -> Result<CirSample> {
    check_time_space(t, x)?;
    let (tau, scale) = params.time_transform(t);
    let besq = BesqSampler::new(params.delta, method)?.sample(tau, x, stream);
    Ok(CirSample { value: scale * besq.value, besq, scale })
}
