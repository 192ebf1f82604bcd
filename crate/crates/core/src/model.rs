//! CIR parameters, the CIR-to-BESQ time change, and the catalog of smooth
//! test functions with their good sets.
//!
//! Two clocks appear throughout the crate. *CIR time* `t` is the time of the
//! process `dX = θ(κ−X)dt + σ√X dB`. *BESQ time* `τ = φ(t) = σ²(e^{θt}−1)/(4θ)`
//! is the clock of the squared Bessel process `Y^δ` with `δ = 4θκ/σ²`, and
//! `X_t(x)` has the law of `e^{−θt}·Y^δ_{φ(t)}(x)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Derivative order available for analytic catalog functions.
pub const MAX_ANALYTIC_ORDER: usize = 32;

fn check_finite(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonFiniteParameter { name, value })
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    check_finite(name, value)?;
    if value > 0.0 {
        Ok(())
    } else {
        Err(Error::NonPositiveParameter { name, value })
    }
}

/// Validated CIR coefficients with the derived BESQ dimension `δ = 4θκ/σ² ≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirParams {
    pub theta: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub delta: f64,
}

impl CirParams {
    /// Validates `(θ, κ, σ)` and rejects `σ² > 4θκ`.
    pub fn new(theta: f64, kappa: f64, sigma: f64) -> Result<Self> {
        check_positive("theta", theta)?;
        check_positive("kappa", kappa)?;
        check_positive("sigma", sigma)?;
        let sigma_sq = sigma * sigma;
        let bound = 4.0 * theta * kappa;
        let delta = bound / sigma_sq;
        if sigma_sq > bound {
            return Err(Error::FellerTypeViolation { sigma_sq, bound, delta });
        }
        Ok(Self { theta, kappa, sigma, delta })
    }

    /// BESQ clock `φ(t) = σ²(e^{θt}−1)/(4θ)`.
    pub fn phi(&self, t: f64) -> f64 {
        self.sigma * self.sigma * (self.theta * t).exp_m1() / (4.0 * self.theta)
    }

    /// Space scale `e^{−θt}`.
    pub fn scale(&self, t: f64) -> f64 {
        (-self.theta * t).exp()
    }

    /// Returns `(τ, scale)` such that `X_t(x) =d scale · Y^δ_τ(x)`.
    pub fn time_transform(&self, t: f64) -> (f64, f64) {
        (self.phi(t), self.scale(t))
    }

    /// Inverse clock: the CIR time at which the BESQ clock reaches `tau`,
    /// `(1/θ)·ln(1 + 4θτ/σ²)`.
    pub fn phi_inverse(&self, tau: f64) -> f64 {
        (4.0 * self.theta * tau / (self.sigma * self.sigma)).ln_1p() / self.theta
    }

    /// Mean-reversion drift `θκ + (−θ)x`, diffusion `σ²x`.
    pub fn generator(&self) -> Generator {
        Generator {
            drift0: self.theta * self.kappa,
            drift1: -self.theta,
            diffusion: self.sigma * self.sigma,
        }
    }

    /// Generator of `BESQ^δ`: drift `δ`, diffusion `4x`.
    pub fn besq_generator(&self) -> Generator {
        Generator { drift0: self.delta, drift1: 0.0, diffusion: 4.0 }
    }
}

/// An affine-coefficient generator `Af = (drift0 + drift1·x) f′ + ½·diffusion·x f″`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Generator {
    pub drift0: f64,
    pub drift1: f64,
    pub diffusion: f64,
}

impl Generator {
    /// Applies `A` given `u′(x)` and `u″(x)`.
    pub fn apply(&self, x: f64, d1: f64, d2: f64) -> f64 {
        (self.drift0 + self.drift1 * x) * d1 + 0.5 * self.diffusion * x * d2
    }

    /// Writes `∂_x^j A^i` as `Σ_m w_m(x) ∂_x^m`, using
    /// `∂_x^j(Av) = ½γx v^{(j+2)} + (jγ/2 + α + βx) v^{(j+1)} + jβ v^{(j)}`.
    ///
    /// Returns `(m, coefficients of w_m in x)` sorted by `m`, for `m ∈ [j, j+2i]`.
    pub fn expand(&self, j: usize, i: usize) -> Vec<(usize, Vec<f64>)> {
        if i == 0 {
            return vec![(j, vec![1.0])];
        }
        let half = 0.5 * self.diffusion;
        let jf = j as f64;
        let parts: [(usize, Vec<f64>); 3] = [
            (j + 2, vec![0.0, half]),
            (j + 1, vec![jf * half + self.drift0, self.drift1]),
            (j, vec![jf * self.drift1]),
        ];
        let mut out: Vec<(usize, Vec<f64>)> = Vec::new();
        for (jj, factor) in parts {
            for (m, w) in self.expand(jj, i - 1) {
                let mut prod = vec![0.0; w.len() + factor.len() - 1];
                for (a, wa) in w.iter().enumerate() {
                    for (b, fb) in factor.iter().enumerate() {
                        prod[a + b] += wa * fb;
                    }
                }
                match out.iter_mut().find(|(mm, _)| *mm == m) {
                    Some((_, acc)) => {
                        if acc.len() < prod.len() {
                            acc.resize(prod.len(), 0.0);
                        }
                        acc.iter_mut().zip(&prod).for_each(|(a, p)| *a += p);
                    }
                    None => out.push((m, prod)),
                }
            }
        }
        out.sort_by_key(|(m, _)| *m);
        out
    }
}

/// Horizon bookkeeping for both clocks.
///
/// `horizon` is a CIR-time horizon `T`. `besq_horizon = φ(T)` is the BESQ
/// clock range it maps onto. `t_tilde = (1/θ)·ln(1+4θT/σ²) = φ⁻¹(T)` is the
/// CIR time whose BESQ clock equals `T`; it is kept for callers that read
/// `T` as a BESQ-clock horizon. Estimators consume CIR time unless the
/// BESQ clock is selected explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeMap {
    pub horizon: f64,
    pub t_tilde: f64,
    pub besq_horizon: f64,
    params: CirParams,
}

impl TimeMap {
    pub fn new(params: CirParams, horizon: f64) -> Result<Self> {
        check_finite("horizon", horizon)?;
        if horizon < 0.0 {
            return Err(Error::InvalidArgument(format!("horizon must be >= 0, got {horizon}")));
        }
        Ok(Self {
            horizon,
            t_tilde: params.phi_inverse(horizon),
            besq_horizon: params.phi(horizon),
            params,
        })
    }

    pub fn phi(&self, t: f64) -> f64 {
        self.params.phi(t)
    }

    pub fn scale(&self, t: f64) -> f64 {
        self.params.scale(t)
    }
}

/// Free-function form of [`CirParams::new`].
pub fn validate_params(theta: f64, kappa: f64, sigma: f64) -> Result<CirParams> {
    CirParams::new(theta, kappa, sigma)
}

/// Free-function form of [`CirParams::time_transform`].
pub fn time_transform(params: &CirParams, t: f64) -> (f64, f64) {
    params.time_transform(t)
}

/// One entry `(C_i, k_i)` of a good set: `|f^{(i)}(x)| ≤ C_i(1 + x^{k_i})`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoodPair {
    pub c: f64,
    pub k: u32,
}

impl GoodPair {
    pub fn bound(&self, x: f64) -> f64 {
        self.c * (1.0 + x.powi(self.k as i32))
    }
}

/// Growth constants for `f, f′, …, f^{(q)}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoodSet(pub Vec<GoodPair>);

impl GoodSet {
    pub fn get(&self, i: usize) -> Result<GoodPair> {
        self.0.get(i).copied().ok_or(Error::OrderExceedsQ {
            order: i,
            q: self.0.len().saturating_sub(1),
        })
    }

    /// Good set of `f^{(shift)}`.
    pub fn shifted(&self, shift: usize) -> GoodSet {
        GoodSet(self.0.iter().skip(shift).copied().collect())
    }
}

/// Evaluation of `f^{(i)}(x)` for `0 ≤ i ≤ q`, `x ≥ 0`.
pub trait Derivatives {
    fn q(&self) -> usize;

    fn deriv(&self, i: usize, x: f64) -> f64;

    /// Writes `f^{(lo+k)}(x)` into `out[k]`.
    fn derivs(&self, lo: usize, x: f64, out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            *o = self.deriv(lo + k, x);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum FnKind {
    /// Coefficients `c_0, c_1, …` of `Σ c_p x^p`.
    Poly(Vec<f64>),
    /// `e^{−λx}`.
    ExpNeg(f64),
    /// `sin(ωx)`.
    Sin(f64),
}

/// A catalog test function with exact derivative evaluators and an analytic good set.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothTestFn {
    name: String,
    q: usize,
    kind: FnKind,
    good_set: GoodSet,
    /// For polynomials, `poly_derivs[i]` holds the coefficients of `f^{(i)}`.
    poly_derivs: Vec<Vec<f64>>,
}

impl SmoothTestFn {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &FnKind {
        &self.kind
    }

    pub fn good_set(&self) -> &GoodSet {
        &self.good_set
    }

    /// Polynomial coefficients, when the function is a polynomial.
    pub fn poly_coeffs(&self) -> Option<&[f64]> {
        match &self.kind {
            FnKind::Poly(c) => Some(c),
            _ => None,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.deriv(0, x)
    }

    /// View of `y ↦ f^{(shift)}(scale·y)·scale^{shift}`, i.e. the `shift`-th
    /// derivative of `y ↦ f(scale·y)`.
    pub fn view(&self, scale: f64, shift: usize) -> FnView<'_, Self> {
        FnView { f: self, scale, shift }
    }

    /// Checks `|f^{(i)}(x)| ≤ C_i(1+x^{k_i})` on the given grid.
    pub fn good_set_holds(&self, grid: &[f64]) -> bool {
        self.good_set.0.iter().enumerate().all(|(i, pair)| {
            grid.iter()
                .all(|&x| self.deriv(i, x).abs() <= pair.bound(x) * (1.0 + 1e-12))
        })
    }

    fn poly(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::MissingArgs {
                name: "poly".into(),
                detail: "expected coefficients c0,c1,...".into(),
            });
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidFunctionArgs {
                name: "poly".into(),
                detail: format!("non-finite coefficient {bad}"),
            });
        }
        let q = MAX_ANALYTIC_ORDER;
        let mut poly_derivs = vec![coeffs.clone()];
        for _ in 0..coeffs.len() {
            let prev = poly_derivs.last().unwrap();
            let next: Vec<f64> = prev.iter().enumerate().skip(1).map(|(p, c)| c * p as f64).collect();
            poly_derivs.push(next);
        }
        let degree = coeffs.iter().rposition(|&c| c != 0.0).unwrap_or(0);
        // |f^{(i)}(x)| ≤ Σ_p |c_p| p!/(p−i)! x^{p−i} ≤ C_i (1 + x^{d−i}).
        let good = (0..=q)
            .map(|i| {
                let c = poly_derivs.get(i).map_or(0.0, |d| d.iter().map(|c| c.abs()).sum());
                GoodPair { c, k: degree.saturating_sub(i) as u32 }
            })
            .collect();
        let name = format!(
            "poly:{}",
            coeffs.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(",")
        );
        Ok(Self { name, q, kind: FnKind::Poly(coeffs), good_set: GoodSet(good), poly_derivs })
    }

    fn exp_neg(lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(Error::InvalidFunctionArgs {
                name: "exp_neg".into(),
                detail: format!("lambda must be positive, got {lambda}"),
            });
        }
        let q = MAX_ANALYTIC_ORDER;
        let good = (0..=q).map(|i| GoodPair { c: lambda.powi(i as i32), k: 0 }).collect();
        Ok(Self {
            name: format!("exp_neg:{lambda}"),
            q,
            kind: FnKind::ExpNeg(lambda),
            good_set: GoodSet(good),
            poly_derivs: Vec::new(),
        })
    }

    fn sin(omega: f64) -> Result<Self> {
        if !omega.is_finite() {
            return Err(Error::InvalidFunctionArgs {
                name: "sin".into(),
                detail: format!("omega must be finite, got {omega}"),
            });
        }
        let q = MAX_ANALYTIC_ORDER;
        let good = (0..=q).map(|i| GoodPair { c: omega.abs().powi(i as i32), k: 0 }).collect();
        Ok(Self {
            name: format!("sin:{omega}"),
            q,
            kind: FnKind::Sin(omega),
            good_set: GoodSet(good),
            poly_derivs: Vec::new(),
        })
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

impl Derivatives for SmoothTestFn {
    fn q(&self) -> usize {
        self.q
    }

    fn deriv(&self, i: usize, x: f64) -> f64 {
        match &self.kind {
            FnKind::Poly(_) => self.poly_derivs.get(i).map_or(0.0, |c| horner(c, x)),
            FnKind::ExpNeg(lambda) => (-lambda).powi(i as i32) * (-lambda * x).exp(),
            FnKind::Sin(omega) => {
                let (s, c) = (omega * x).sin_cos();
                let phase = [s, c, -s, -c][i % 4];
                omega.powi(i as i32) * phase
            }
        }
    }

    fn derivs(&self, lo: usize, x: f64, out: &mut [f64]) {
        match &self.kind {
            FnKind::Poly(_) => {
                for (k, o) in out.iter_mut().enumerate() {
                    *o = self.poly_derivs.get(lo + k).map_or(0.0, |c| horner(c, x));
                }
            }
            FnKind::ExpNeg(lambda) => {
                let mut v = (-lambda).powi(lo as i32) * (-lambda * x).exp();
                for o in out.iter_mut() {
                    *o = v;
                    v *= -lambda;
                }
            }
            FnKind::Sin(omega) => {
                let (s, c) = (omega * x).sin_cos();
                let cycle = [s, c, -s, -c];
                let mut w = omega.powi(lo as i32);
                for (k, o) in out.iter_mut().enumerate() {
                    *o = w * cycle[(lo + k) % 4];
                    w *= omega;
                }
            }
        }
    }
}

impl fmt::Display for SmoothTestFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Builds a catalog function by name: `poly` (coefficients `c0..cd`),
/// `exp_neg` (`λ > 0`) or `sin` (`ω`).
pub fn catalog_fn(name: &str, args: &[f64]) -> Result<SmoothTestFn> {
    match name {
        "poly" => SmoothTestFn::poly(args.to_vec()),
        "exp_neg" | "sin" => {
            let [arg] = args else {
                return Err(Error::MissingArgs {
                    name: name.into(),
                    detail: format!("expected exactly one argument, got {}", args.len()),
                });
            };
            if name == "exp_neg" {
                SmoothTestFn::exp_neg(*arg)
            } else {
                SmoothTestFn::sin(*arg)
            }
        }
        "call" | "put" | "digital" | "abs" => Err(Error::NonSmoothFunction(name.into())),
        other => Err(Error::UnknownFunction(other.into())),
    }
}

impl FromStr for SmoothTestFn {
    type Err = Error;

    /// Parses `poly:c0,c1,...`, `exp_neg:lambda` or `sin:omega`.
    fn from_str(s: &str) -> Result<Self> {
        let (name, rest) = s.split_once(':').unwrap_or((s, ""));
        let args = rest
            .split(',')
            .map(str::trim)
            .filter(|p| !p.is_empty())
            .map(|p| {
                p.parse::<f64>().map_err(|_| Error::InvalidFunctionArgs {
                    name: name.into(),
                    detail: format!("cannot parse '{p}' as a number"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        catalog_fn(name.trim(), &args)
    }
}

/// The `shift`-th derivative of `y ↦ f(scale·y)`.
#[derive(Debug, Clone, Copy)]
pub struct FnView<'a, D: ?Sized> {
    pub f: &'a D,
    pub scale: f64,
    pub shift: usize,
}

impl<'a, D: Derivatives + ?Sized> FnView<'a, D> {
    pub fn new(f: &'a D, scale: f64) -> Self {
        Self { f, scale, shift: 0 }
    }

    pub fn shifted(&self, by: usize) -> Self {
        Self { shift: self.shift + by, ..*self }
    }
}

impl<D: Derivatives + ?Sized> Derivatives for FnView<'_, D> {
    fn q(&self) -> usize {
        self.f.q().saturating_sub(self.shift)
    }

    fn deriv(&self, i: usize, y: f64) -> f64 {
        let order = i + self.shift;
        self.scale.powi(order as i32) * self.f.deriv(order, self.scale * y)
    }

    fn derivs(&self, lo: usize, y: f64, out: &mut [f64]) {
        let first = lo + self.shift;
        self.f.derivs(first, self.scale * y, out);
        if self.scale != 1.0 {
            let mut w = self.scale.powi(first as i32);
            for o in out.iter_mut() {
                *o *= w;
                w *= self.scale;
            }
        }
    }
}

/// How much smoothness a derivative request consumes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SmoothnessRule {
    /// `2j + 4i ≤ q`.
    #[default]
    Standard,
    /// One extra order per request, `2j + 4i + 1 ≤ q`.
    Strict,
}

/// Request for `∂_x^j ∂_t^i u`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DerivRequest {
    pub j: usize,
    pub i: usize,
}

impl DerivRequest {
    pub fn new(j: usize, i: usize) -> Self {
        Self { j, i }
    }

    /// Highest derivative order of `f` the request touches.
    pub fn needed_order(&self, rule: SmoothnessRule) -> usize {
        let base = 2 * self.j + 4 * self.i;
        match rule {
            SmoothnessRule::Standard => base,
            SmoothnessRule::Strict => base + 1,
        }
    }

    pub fn check(&self, q: usize, rule: SmoothnessRule) -> Result<()> {
        let needed = self.needed_order(rule);
        if needed > q {
            Err(Error::InsufficientSmoothness { needed, q })
        } else {
            Ok(())
        }
    }
}
