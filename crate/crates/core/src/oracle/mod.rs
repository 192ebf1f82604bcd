//! Deterministic reference values: closed-form moments, the Laplace
//! transform, Gaussian absolute moments and transition-density quadrature.

pub mod bessel;
pub mod density;
pub mod moment;

use statrs::function::gamma::gamma;

pub use density::{besq_expectation, density_u, QuadConfig};
pub use moment::{besq_moment, cir_moment, MomentPoly};

use crate::mc::Clock;
use crate::model::{CirParams, FnKind, SmoothTestFn};

/// `E e^{−λ X_t(x)} = (1+c)^{−δ/2} exp(−λx e^{−θt}/(1+c))`, `c = λσ²(1−e^{−θt})/(2θ)`.
pub fn cir_laplace(params: &CirParams, t: f64, x: f64, lam: f64) -> f64 {
    let (tau, scale) = params.time_transform(t);
    besq_laplace(params.delta, tau, x, lam * scale)
}

/// `E e^{−λ Y^δ_τ(x)} = (1+2λτ)^{−δ/2} exp(−λx/(1+2λτ))`.
pub fn besq_laplace(delta: f64, tau: f64, x: f64, lam: f64) -> f64 {
    let c = 1.0 + 2.0 * lam * tau;
    c.powf(-0.5 * delta) * (-lam * x / c).exp()
}

/// `E|ξ|^{2p} = 2^p Γ(p+½)/√π` for a standard normal `ξ`.
pub fn gaussian_abs_moment(p: f64) -> f64 {
    2f64.powf(p) * gamma(p + 0.5) / std::f64::consts::PI.sqrt()
}

/// `∂_x^j` of the Laplace transform, as a function of `(t, x)` in the given clock.
fn laplace_dx(params: &CirParams, clock: Clock, t: f64, x: f64, lam: f64, j: usize) -> f64 {
    let (tau, scale) = match clock {
        Clock::Cir => params.time_transform(t),
        Clock::Besq => (t, 1.0),
    };
    let eff = lam * scale;
    let rate = eff / (1.0 + 2.0 * eff * tau);
    (-rate).powi(j as i32) * besq_laplace(params.delta, tau, x, eff)
}

fn moment_poly(params: &CirParams, clock: Clock, p: usize) -> MomentPoly {
    match clock {
        Clock::Cir => MomentPoly::cir(params, p),
        Clock::Besq => MomentPoly::besq(params.delta, p),
    }
}

/// Exact `∂_x^j ∂_t^i u(t, x)` where a closed form exists (polynomials and `exp_neg`).
///
/// Time derivatives of the Laplace transform come from the generator
/// expansion applied to its exact `x`-derivatives.
pub fn deriv_exact(
    f: &SmoothTestFn,
    params: &CirParams,
    clock: Clock,
    t: f64,
    x: f64,
    j: usize,
    i: usize,
) -> Option<f64> {
    match f.kind() {
        FnKind::Poly(coeffs) => Some(
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, c)| **c != 0.0)
                .map(|(p, c)| c * moment_poly(params, clock, p).deriv(t, x, j, i))
                .sum(),
        ),
        FnKind::ExpNeg(lam) => {
            let generator = match clock {
                Clock::Cir => params.generator(),
                Clock::Besq => params.besq_generator(),
            };
            Some(
                generator
                    .expand(j, i)
                    .into_iter()
                    .map(|(m, w)| moment::poly_eval(&w, x) * laplace_dx(params, clock, t, x, *lam, m))
                    .sum(),
            )
        }
        FnKind::Sin(_) => None,
    }
}

/// Exact `u(t, x)` where a closed form exists.
pub fn u_exact(f: &SmoothTestFn, params: &CirParams, clock: Clock, t: f64, x: f64) -> Option<f64> {
    deriv_exact(f, params, clock, t, x, 0, 0)
}
