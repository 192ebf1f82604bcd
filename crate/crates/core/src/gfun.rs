//! The symmetrized quotient
//!
//! ```text
//! g(x; a, b) = [f((√x+a)²+b) − f((√x−a)²+b)] / √x
//! ```
//!
//! and its `x`-derivatives, all evaluated through the integral form
//! `g = 2a ∫_{−1}^{1} f′(A + x + 2a√x s) ds` with `A = a² + b`, which has no
//! negative powers of `x` and is therefore valid at `x = 0`.
//!
//! Derivatives are expressed through the iterated integrals
//!
//! ```text
//! F^{p,q} = ∫_{−1}^{1} ∫_0^{s₁} … ∫_0^{s_p} f^{(q)}(A + x + 2a√x s_{p+1}) ds_{p+1} s_p ds_p … s₁ ds₁
//! ```
//!
//! which obey `∂_x F^{p,q} = F^{p,q+1} + 2a²F^{p+1,q+2}`, giving
//! `∂_x^l g = a Σ_j c_{j,l} a^{2j} F^{j,l+j+1}` with `c_{j,l+1} = c_{j,l} + 2c_{j−1,l}`.
//!
//! Swapping the order of integration collapses `F^{p,q}` to the single
//! integral `∫_{−1}^{1} f^{(q)}(A + x + 2a√x v) K_p(v) dv` with
//! `K_p(v) = (1 − v²)^p / (2^p p!)`; both branches of the nesting (`s₁ > 0`
//! and `s₁ < 0`) contribute the same kernel. [`GCalculus`] evaluates this
//! form with one shared Gauss–Legendre node set; [`f_pq_nested`] evaluates
//! the literal nesting and is kept as an independent check.

use std::sync::LazyLock;

use crate::error::{Error, Result};
use crate::model::{Derivatives, GoodSet, SmoothTestFn};
use crate::quadrature::{GaussLegendre, DEFAULT_GL_ORDER};

/// Deepest iterated integral `F^{p,·}` supported by default.
pub const MAX_NESTING: usize = 4;

/// Row `l` of the coefficient table: `c_{0,0} = 2`, `c_{j,l+1} = c_{j,l} + 2c_{j−1,l}`.
pub fn coeffs(l: usize) -> Vec<u64> {
    let mut row = vec![2u64];
    for _ in 0..l {
        let mut next = row.clone();
        next.push(0);
        for j in 1..next.len() {
            next[j] = next[j]
                .checked_add(row[j - 1].checked_mul(2).expect("coefficient overflow"))
                .expect("coefficient overflow");
        }
        row = next;
    }
    row
}

/// `∫_{−1}^{1} K_p = 2 / (2p+1)!!`, the value of `F^{p,q}` per unit of `f^{(q)}` at `x = 0`.
pub fn nested_weight(p: usize) -> f64 {
    (1..=p).fold(2.0, |w, m| w / (2 * m + 1) as f64)
}

/// Arguments `(x, a, b)` with `x ≥ 0`, `b ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GFunArgs {
    pub x: f64,
    pub a: f64,
    pub b: f64,
}

impl GFunArgs {
    pub fn new(x: f64, a: f64, b: f64) -> Result<Self> {
        if !(x.is_finite() && a.is_finite() && b.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-finite g arguments ({x}, {a}, {b})")));
        }
        if x < 0.0 || b < 0.0 {
            return Err(Error::InvalidArgument(format!("g needs x >= 0 and b >= 0, got x={x}, b={b}")));
        }
        Ok(Self { x, a, b })
    }

    /// `A = a² + b`.
    pub fn big_a(&self) -> f64 {
        self.a * self.a + self.b
    }
}

fn order_check(order: usize, q: usize) -> Result<()> {
    if order > q {
        Err(Error::OrderExceedsQ { order, q })
    } else {
        Ok(())
    }
}

/// Gauss–Legendre node set with the nesting kernels folded into the weights.
#[derive(Debug, Clone)]
pub struct GCalculus {
    gl: GaussLegendre,
    cap: usize,
    /// `kernels[p][k] = w_k · K_p(v_k)`.
    kernels: Vec<Vec<f64>>,
    rows: Vec<Vec<f64>>,
}

static STANDARD: LazyLock<GCalculus> = LazyLock::new(|| GCalculus::new(DEFAULT_GL_ORDER, MAX_NESTING));

impl GCalculus {
    pub fn new(order: usize, cap: usize) -> Self {
        let gl = GaussLegendre::new(order);
        let mut kernels = Vec::with_capacity(cap + 1);
        for p in 0..=cap {
            let norm = (1..=p).fold(1.0, |acc, m| acc * 2.0 * m as f64);
            kernels.push(
                gl.nodes
                    .iter()
                    .zip(&gl.weights)
                    .map(|(&v, &w)| w * (1.0 - v * v).powi(p as i32) / norm)
                    .collect(),
            );
        }
        let rows = (0..=cap).map(|l| coeffs(l).into_iter().map(|c| c as f64).collect()).collect();
        Self { gl, cap, kernels, rows }
    }

    /// Order 64, nesting cap 4.
    pub fn standard() -> &'static GCalculus {
        &STANDARD
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn nodes(&self) -> &[f64] {
        &self.gl.nodes
    }

    fn check_nesting(&self, p: usize) -> Result<()> {
        if p > self.cap {
            Err(Error::NestingTooDeep { depth: p, cap: self.cap })
        } else {
            Ok(())
        }
    }

    /// `F^{p,q}(x; a, b)`.
    pub fn f_pq<D: Derivatives + ?Sized>(&self, f: &D, p: usize, q: usize, args: GFunArgs) -> Result<f64> {
        self.check_nesting(p)?;
        order_check(q, f.q())?;
        let mut table = NodeTable::default();
        table.fill(self, f, args, q, q);
        Ok(table.f_pq(self, p, q))
    }

    /// `g_i(x; a, b)`, the symmetrized quotient of `f^{(i)}`.
    pub fn g_eval<D: Derivatives + ?Sized>(&self, f: &D, i: usize, args: GFunArgs) -> Result<f64> {
        order_check(i + 1, f.q())?;
        let mut table = NodeTable::default();
        table.fill(self, f, args, i + 1, i + 1);
        Ok(2.0 * args.a * table.f_pq(self, 0, i + 1))
    }

    /// `∂_x^l g(x; a, b)` for the quotient of `f` itself.
    pub fn g_deriv<D: Derivatives + ?Sized>(&self, f: &D, l: usize, args: GFunArgs) -> Result<f64> {
        order_check(2 * l + 1, f.q())?;
        self.check_nesting(l)?;
        let mut table = NodeTable::default();
        table.fill(self, f, args, l + 1, 2 * l + 1);
        Ok(table.g_deriv(self, l, 0))
    }
}

/// Derivatives `f^{(lo..=hi)}` tabulated at the quadrature nodes for one `(x, a, b)`.
///
/// Reusing one table across every `F^{p,q}` needed at a point is what makes
/// the Monte-Carlo estimators affordable.
#[derive(Debug, Clone, Default)]
pub struct NodeTable {
    lo: usize,
    hi: usize,
    n: usize,
    a: f64,
    values: Vec<f64>,
    scratch: Vec<f64>,
}

impl NodeTable {
    /// Tabulates `f^{(q)}(A + x + 2a√x v_k)` for `lo ≤ q ≤ hi`.
    pub fn fill<D: Derivatives + ?Sized>(&mut self, calc: &GCalculus, f: &D, args: GFunArgs, lo: usize, hi: usize) {
        let n = calc.gl.nodes.len();
        let width = hi + 1 - lo;
        self.lo = lo;
        self.hi = hi;
        self.n = n;
        self.a = args.a;
        self.values.resize(width * n, 0.0);
        self.scratch.resize(width, 0.0);
        let base = args.big_a() + args.x;
        let slope = 2.0 * args.a * args.x.sqrt();
        if slope == 0.0 {
            f.derivs(lo, base, &mut self.scratch);
            for (r, &v) in self.scratch.iter().enumerate() {
                self.values[r * n..(r + 1) * n].fill(v);
            }
            return;
        }
        for (k, &v) in calc.gl.nodes.iter().enumerate() {
            f.derivs(lo, base + slope * v, &mut self.scratch);
            for (r, &d) in self.scratch.iter().enumerate() {
                self.values[r * n + k] = d;
            }
        }
    }

    /// `F^{p,q}` from the tabulated values.
    pub fn f_pq(&self, calc: &GCalculus, p: usize, q: usize) -> f64 {
        debug_assert!(q >= self.lo && q <= self.hi);
        let row = &self.values[(q - self.lo) * self.n..(q - self.lo + 1) * self.n];
        row.iter().zip(&calc.kernels[p]).map(|(v, w)| v * w).sum()
    }

    /// `∂_x^l g` for the quotient of `f^{(shift)}`: `a Σ_j c_{j,l} a^{2j} F^{j, shift+l+j+1}`.
    pub fn g_deriv(&self, calc: &GCalculus, l: usize, shift: usize) -> f64 {
        let a2 = self.a * self.a;
        let mut power = 1.0;
        let mut sum = 0.0;
        for (j, c) in calc.rows[l].iter().enumerate() {
            sum += c * power * self.f_pq(calc, j, shift + l + j + 1);
            power *= a2;
        }
        self.a * sum
    }
}

/// `F^{p,q}` with the standard node set.
pub fn f_pq<D: Derivatives + ?Sized>(f: &D, p: usize, q: usize, args: GFunArgs) -> Result<f64> {
    GCalculus::standard().f_pq(f, p, q, args)
}

/// `g_i(x; a, b)` with the standard node set; equals `4a f^{(i+1)}(A)` at `x = 0`.
pub fn g_eval<D: Derivatives + ?Sized>(f: &D, i: usize, args: GFunArgs) -> Result<f64> {
    GCalculus::standard().g_eval(f, i, args)
}

/// `∂_x^l g(x; a, b)` with the standard node set. Needs `2l+1 ≤ q`.
pub fn g_deriv<D: Derivatives + ?Sized>(f: &D, l: usize, args: GFunArgs) -> Result<f64> {
    GCalculus::standard().g_deriv(f, l, args)
}

/// Closed form of `∂_x^l g` at `x = 0`: `a Σ_j c_{j,l} a^{2j} f^{(l+j+1)}(A)·2/(2j+1)!!`.
pub fn g_limit_at_zero<D: Derivatives + ?Sized>(f: &D, l: usize, a: f64, b: f64) -> Result<f64> {
    order_check(2 * l + 1, f.q())?;
    let big_a = a * a + b;
    let sum: f64 = coeffs(l)
        .into_iter()
        .enumerate()
        .map(|(j, c)| c as f64 * a.powi(2 * j as i32) * nested_weight(j) * f.deriv(l + j + 1, big_a))
        .sum();
    Ok(a * sum)
}

/// `F^{p,q}` by literal nested Gauss–Legendre of the given order per level.
/// Cost is `order^{p+1}` evaluations.
pub fn f_pq_nested<D: Derivatives + ?Sized>(
    f: &D,
    p: usize,
    q: usize,
    args: GFunArgs,
    order: usize,
) -> Result<f64> {
    if p > MAX_NESTING {
        return Err(Error::NestingTooDeep { depth: p, cap: MAX_NESTING });
    }
    order_check(q, f.q())?;
    let gl = GaussLegendre::new(order);
    let base = args.big_a() + args.x;
    let slope = 2.0 * args.a * args.x.sqrt();
    fn level<D: Derivatives + ?Sized>(
        gl: &GaussLegendre,
        f: &D,
        q: usize,
        base: f64,
        slope: f64,
        depth: usize,
        p: usize,
        lo: f64,
        hi: f64,
    ) -> f64 {
        if depth == p {
            gl.integrate(lo, hi, |s| f.deriv(q, base + slope * s))
        } else {
            gl.integrate(lo, hi, |s| s * level(gl, f, q, base, slope, depth + 1, p, 0.0, s))
        }
    }
    Ok(level(&gl, f, q, base, slope, 0, p, -1.0, 1.0))
}

/// `(C, k)` with `|∂_x^l g(x; a, b)| ≤ C|a|(1 + x^k + A^k)`, from the good set of `f`.
///
/// Each term `a^{2j} F^{j,l+j+1}` is bounded using `a² ≤ A`, the argument
/// bound `A + x + 2a√x s ≤ 2A + 2x`, and `∫K_j = 2/(2j+1)!!`, so
/// `k = max_j (j + k_{l+j+1})` and `C = 3 Σ_j c_{j,l} (2/(2j+1)!!) 4^{k_{l+j+1}} C_{l+j+1}`.
pub fn g_growth_constants(good: &GoodSet, l: usize) -> Result<(f64, u32)> {
    let mut c_total = 0.0;
    let mut k_max = 0;
    for (j, c) in coeffs(l).into_iter().enumerate() {
        let pair = good.get(l + j + 1)?;
        k_max = k_max.max(j as u32 + pair.k);
        c_total += c as f64 * nested_weight(j) * 4f64.powi(pair.k as i32) * pair.c;
    }
    Ok((3.0 * c_total, k_max))
}

/// Evaluates the growth bound `C|a|(1 + x^k + A^k)` for `∂_x^l g`.
pub fn g_growth_bound(f: &SmoothTestFn, l: usize, args: GFunArgs) -> Result<f64> {
    order_check(2 * l + 1, f.q())?;
    let (c, k) = g_growth_constants(f.good_set(), l)?;
    let k = k as i32;
    Ok(c * args.a.abs() * (1.0 + args.x.powi(k) + args.big_a().powi(k)))
}
