//! Monte-Carlo estimators of `u(t,x) = E f(X_t(x))` and `∂_x^j ∂_t^i u`.
//!
//! Every path draws one decomposed sample `Y = (√x+a)² + b` in BESQ time
//! `τ`. In the CIR clock the space scaling is folded into the test function,
//! `f_t(y) = f(e^{−θt} y)`, so only BESQ derivatives are needed. The
//! spatial estimator is the symmetrized recursion
//!
//! ```text
//! D(0) = f_t(Y)
//! D(m) = f_t^{(m)}(Y) + Σ_{k=1}^{m} (a/2) · ∂_x^{m−k} g[f_t^{(k)}](x; a, b)
//! ```
//!
//! whose expectation is `∂_x^m u`. Each remainder term is even in `ξ`, which
//! removes the `1/√x` singularity of the naive likelihood. Time derivatives
//! use the generator expansion `∂_x^j ∂_t^i u = Σ_m w_m(x) ∂_x^m u`, applied
//! path by path to one shared sample.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gfun::{g_growth_constants, GCalculus, GFunArgs, NodeTable};
use crate::mc::{run_paths, Clock, EstimatorConfig, McEstimate};
use crate::model::{CirParams, DerivRequest, Derivatives, FnView, Generator, SmoothTestFn};
use crate::oracle::moment::{poly_eval, MomentPoly};
use crate::sampler::{BesqSampler, DecomposedSample, Method, UnitDraw};

fn check_point(t: f64, x: f64) -> Result<()> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::InvalidArgument(format!("t must be finite and >= 0, got {t}")));
    }
    if !(x >= 0.0 && x.is_finite()) {
        return Err(Error::InvalidArgument(format!("x must be finite and >= 0, got {x}")));
    }
    Ok(())
}

/// `(τ, scale)` for a time in the configured clock.
pub fn clock_transform(params: &CirParams, clock: Clock, t: f64) -> (f64, f64) {
    match clock {
        Clock::Cir => params.time_transform(t),
        Clock::Besq => (t, 1.0),
    }
}

/// The generator driving `∂_t` in the configured clock.
pub fn clock_generator(params: &CirParams, clock: Clock) -> Generator {
    match clock {
        Clock::Cir => params.generator(),
        Clock::Besq => params.besq_generator(),
    }
}

/// Per-path evaluation of `D(m)` for a contiguous range of orders.
#[derive(Debug, Clone)]
pub struct PathEvaluator<'a> {
    f: &'a SmoothTestFn,
    sampler: BesqSampler,
    calc: Cow<'static, GCalculus>,
    m_lo: usize,
    m_hi: usize,
}

impl<'a> PathEvaluator<'a> {
    pub fn new(f: &'a SmoothTestFn, delta: f64, method: Method, m_lo: usize, m_hi: usize) -> Result<Self> {
        assert!(m_lo <= m_hi);
        let std_calc = GCalculus::standard();
        let calc = if m_hi <= std_calc.cap() + 1 {
            Cow::Borrowed(std_calc)
        } else {
            Cow::Owned(GCalculus::new(crate::quadrature::DEFAULT_GL_ORDER, m_hi - 1))
        };
        Ok(Self { f, sampler: BesqSampler::new(delta, method)?, calc, m_lo, m_hi })
    }

    pub fn sampler(&self) -> &BesqSampler {
        &self.sampler
    }

    pub fn orders(&self) -> std::ops::RangeInclusive<usize> {
        self.m_lo..=self.m_hi
    }

    /// Writes the path value of `D(m)` into `out[m − m_lo]`.
    pub fn eval(&self, table: &mut NodeTable, s: &DecomposedSample, x: f64, scale: f64, out: &mut [f64]) {
        let view = FnView::new(self.f, scale);
        for (o, m) in out.iter_mut().zip(self.m_lo..=self.m_hi) {
            *o = view.deriv(m, s.value);
        }
        if self.m_hi == 0 || s.a == 0.0 {
            return;
        }
        let lo = self.m_lo.max(1) + 1;
        let hi = 2 * self.m_hi;
        let args = GFunArgs { x, a: s.a, b: s.b };
        table.fill(&self.calc, &view, args, lo, hi);
        let half_a = 0.5 * s.a;
        for (o, m) in out.iter_mut().zip(self.m_lo..=self.m_hi) {
            for k in 1..=m {
                *o += half_a * table.g_deriv(&self.calc, m - k, k);
            }
        }
    }
}

/// `u(t, x)`. Exact at `t = 0`.
pub fn estimate_u(
    f: &SmoothTestFn,
    params: &CirParams,
    t: f64,
    x: f64,
    cfg: &EstimatorConfig,
) -> Result<McEstimate> {
    check_point(t, x)?;
    cfg.validate()?;
    if t == 0.0 {
        return Ok(McEstimate::exact(f.eval(x), cfg));
    }
    let (tau, scale) = clock_transform(params, cfg.clock, t);
    let sampler = BesqSampler::new(params.delta, cfg.method)?;
    let m = run_paths(cfg, 1, || (), |_, stream, row| {
        row[0] = f.eval(scale * sampler.draw_unit(stream).at(tau, x).value);
    })?;
    Ok(m.estimate(0, cfg))
}

/// `∂_x^j u(t, x)`.
pub fn estimate_dx(
    f: &SmoothTestFn,
    params: &CirParams,
    t: f64,
    x: f64,
    j: usize,
    cfg: &EstimatorConfig,
) -> Result<McEstimate> {
    estimate_mixed(f, params, t, x, DerivRequest::new(j, 0), cfg)
}

/// `∂_x^j ∂_t^i u(t, x)`.
pub fn estimate_mixed(
    f: &SmoothTestFn,
    params: &CirParams,
    t: f64,
    x: f64,
    req: DerivRequest,
    cfg: &EstimatorConfig,
) -> Result<McEstimate> {
    check_point(t, x)?;
    cfg.validate()?;
    req.check(f.q(), cfg.smoothness)?;
    if req.i >= 1 && t == 0.0 {
        return Err(Error::InvalidArgument("time derivatives need t > 0".into()));
    }
    if req.j == 0 && req.i == 0 {
        return estimate_u(f, params, t, x, cfg);
    }
    let terms = clock_generator(params, cfg.clock).expand(req.j, req.i);
    let m_lo = terms.first().map_or(req.j, |(m, _)| *m);
    let m_hi = terms.last().map_or(req.j, |(m, _)| *m);
    let mut weights = vec![0.0; m_hi - m_lo + 1];
    for (m, w) in &terms {
        weights[m - m_lo] = poly_eval(w, x);
    }
    let eval = PathEvaluator::new(f, params.delta, cfg.method, m_lo, m_hi)?;
    let (tau, scale) = clock_transform(params, cfg.clock, t);
    let width = weights.len();
    let m = run_paths(
        cfg,
        1,
        || (NodeTable::default(), vec![0.0; width]),
        |(table, d), stream, row| {
            let s = eval.sampler.draw_unit(stream).at(tau, x);
            eval.eval(table, &s, x, scale, d);
            row[0] = d.iter().zip(&weights).map(|(v, w)| v * w).sum();
        },
    )?;
    Ok(m.estimate(0, cfg))
}

/// Central difference `[f_t(Y(x+h)) − f_t(Y(x−h))]/(2h)` with one shared draw per path.
pub fn estimate_dx_crnfd(
    f: &SmoothTestFn,
    params: &CirParams,
    t: f64,
    x: f64,
    h: f64,
    cfg: &EstimatorConfig,
) -> Result<McEstimate> {
    check_point(t, x)?;
    cfg.validate()?;
    if !(h > 0.0 && h.is_finite()) {
        return Err(Error::InvalidArgument(format!("step must be positive, got {h}")));
    }
    if h > x {
        return Err(Error::StepTooLarge { h, x });
    }
    let (tau, scale) = clock_transform(params, cfg.clock, t);
    let sampler = BesqSampler::new(params.delta, cfg.method)?;
    let m = run_paths(cfg, 1, || (), |_, stream, row| {
        let unit = sampler.draw_unit(stream);
        let up = f.eval(scale * unit.at(tau, x + h).value);
        let down = f.eval(scale * unit.at(tau, x - h).value);
        row[0] = (up - down) / (2.0 * h);
    })?;
    Ok(m.estimate(0, cfg))
}

/// Per-path comparison of `D(m)` under `ξ` and `−ξ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AntitheticReport {
    pub plus: McEstimate,
    pub minus: McEstimate,
    pub paired: McEstimate,
    /// Mean of the per-path variances of the two unpaired estimators.
    pub var_unpaired: f64,
    /// Per-path variance of `(D(ξ) + D(−ξ))/2`.
    pub var_paired: f64,
}

/// Evaluates `∂_x^j u` on each draw and its reflection.
pub fn estimate_dx_antithetic(
    f: &SmoothTestFn,
    params: &CirParams,
    t: f64,
    x: f64,
    j: usize,
    cfg: &EstimatorConfig,
) -> Result<AntitheticReport> {
    check_point(t, x)?;
    cfg.validate()?;
    DerivRequest::new(j, 0).check(f.q(), cfg.smoothness)?;
    let eval = PathEvaluator::new(f, params.delta, cfg.method, j, j)?;
    let (tau, scale) = clock_transform(params, cfg.clock, t);
    let m = run_paths(cfg, 3, NodeTable::default, |table, stream, row| {
        let unit: UnitDraw = eval.sampler.draw_unit(stream);
        let mut d = [0.0];
        eval.eval(table, &unit.at(tau, x), x, scale, &mut d);
        row[0] = d[0];
        eval.eval(table, &unit.reflected().at(tau, x), x, scale, &mut d);
        row[1] = d[0];
        row[2] = 0.5 * (row[0] + row[1]);
    })?;
    Ok(AntitheticReport {
        plus: m.estimate(0, cfg),
        minus: m.estimate(1, cfg),
        paired: m.estimate(2, cfg),
        var_unpaired: 0.5 * (m.variance(0) + m.variance(1)),
        var_paired: m.variance(2),
    })
}

fn poly_add(acc: &mut Vec<f64>, p: &[f64]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    acc.iter_mut().zip(p).for_each(|(a, b)| *a += b);
}

fn poly_mul(p: &[f64], q: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] += a * b;
        }
    }
    out
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn double_factorial_odd(r: usize) -> f64 {
    (1..=r).fold(1.0, |acc, i| acc * (2 * i + 1) as f64)
}

/// `E[a² A^K]` for `a = ξ√τ`, `A = a² + b`, `b = τ·2Gamma((δ−1)/2)`.
fn mixed_moment(delta: f64, tau: f64, k: usize) -> f64 {
    let alpha = 0.5 * (delta - 1.0);
    let gamma_moment = |s: usize| (0..s).fold(1.0, |acc, i| acc * 2.0 * (alpha + i as f64));
    let sum: f64 = (0..=k)
        .map(|r| binomial(k, r) * double_factorial_odd(r) * gamma_moment(k - r))
        .sum();
    tau.powi(k as i32 + 1) * sum
}

/// Polynomial with nonnegative coefficients bounding `E|D(m)|` in `x`.
fn envelope_poly(f: &SmoothTestFn, delta: f64, tau: f64, m: usize) -> Result<Vec<f64>> {
    let good = f.good_set();
    let pair = good.get(m)?;
    let mut env = MomentPoly::besq(delta, pair.k as usize).x_coeffs(tau);
    env[0] += 1.0;
    env.iter_mut().for_each(|c| *c *= pair.c);
    for k in 1..=m {
        let (c, kg) = g_growth_constants(&good.shifted(k), m - k)?;
        // (|a|/2)·c|a|(1 + x^kg + A^kg)
        let mut term = vec![0.0; kg as usize + 1];
        term[0] += tau;
        term[kg as usize] += tau;
        term[0] += mixed_moment(delta, tau, kg as usize);
        term.iter_mut().for_each(|v| *v *= 0.5 * c);
        poly_add(&mut env, &term);
    }
    Ok(env)
}

/// `(C, k)` with `|∂_x^j ∂_t^i u(t, x)| ≤ C(1 + x^k)` for all `x ≥ 0`,
/// propagated from the good set of `f` through the estimator.
///
/// The bound takes the law of `(a, b)` from the gamma representation,
/// which the squares representation shares.
pub fn growth_envelope(
    f: &SmoothTestFn,
    params: &CirParams,
    t: f64,
    req: DerivRequest,
    cfg: &EstimatorConfig,
) -> Result<(f64, u32)> {
    req.check(f.q(), cfg.smoothness)?;
    let (tau, _) = clock_transform(params, cfg.clock, t);
    let mut total = vec![0.0];
    for (m, w) in clock_generator(params, cfg.clock).expand(req.j, req.i) {
        let abs_w: Vec<f64> = w.iter().map(|c| c.abs()).collect();
        if abs_w.iter().all(|&c| c == 0.0) {
            continue;
        }
        poly_add(&mut total, &poly_mul(&abs_w, &envelope_poly(f, params.delta, tau, m)?));
    }
    let k = total.iter().rposition(|&c| c > 0.0).unwrap_or(0);
    Ok((total.iter().sum(), k as u32))
}
