//! Closed-form moments of the CIR and BESQ marginals.

use crate::model::CirParams;

/// Coefficients `c_0, c_1, …` of a polynomial in `x`.
pub(crate) fn poly_eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, &c| acc * x + c)
}

/// `∂_x^j` of a coefficient vector.
pub(crate) fn poly_deriv(coeffs: &[f64], j: usize) -> Vec<f64> {
    coeffs
        .iter()
        .enumerate()
        .skip(j)
        .map(|(p, &c)| c * ((p - j + 1)..=p).map(|m| m as f64).product::<f64>())
        .collect()
}

/// Time dependence of the terms of a [`MomentPoly`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeBasis {
    /// Term `r` carries `t^r`.
    Power,
    /// Term `r` carries `e^{−pθt}·φ(t)^r = c^r e^{−(p−r)θt}(1−e^{−θt})^r`
    /// with `c = σ²/(4θ)`. Every piece is nonnegative, so evaluation is
    /// free of cancellation even for small `θ`.
    Cir { theta: f64, c: f64, p: usize },
}

impl TimeBasis {
    /// `∂_t^i` of basis element `r` at time `t`.
    fn deriv(&self, r: usize, i: usize, t: f64) -> f64 {
        match *self {
            TimeBasis::Power => {
                if i > r {
                    return 0.0;
                }
                let falling: f64 = ((r - i + 1)..=r).map(|m| m as f64).product();
                falling * t.powi((r - i) as i32)
            }
            TimeBasis::Cir { theta, c, p } => {
                // Terms (a, r, w) stand for w·u^a(1−u)^r with u = e^{−θt}, and
                // d/dt[u^a(1−u)^r] = −aθ u^a(1−u)^r + rθ u^{a+1}(1−u)^{r−1}.
                let mut terms = vec![(p - r, r, c.powi(r as i32))];
                for _ in 0..i {
                    let mut next: Vec<(usize, usize, f64)> = Vec::with_capacity(2 * terms.len());
                    let mut add = |a: usize, r: usize, w: f64| {
                        match next.iter_mut().find(|(aa, rr, _)| *aa == a && *rr == r) {
                            Some(slot) => slot.2 += w,
                            None => next.push((a, r, w)),
                        }
                    };
                    for &(a, r, w) in &terms {
                        if a > 0 {
                            add(a, r, -(a as f64) * theta * w);
                        }
                        if r > 0 {
                            add(a + 1, r - 1, r as f64 * theta * w);
                        }
                    }
                    terms = next;
                }
                let u = (-theta * t).exp();
                let v = -(-theta * t).exp_m1();
                terms.iter().map(|&(a, r, w)| w * u.powi(a as i32) * v.powi(r as i32)).sum()
            }
        }
    }
}

/// `m_p(t, x) = E Z_t(x)^p = Σ_r b_r(t) · P_r(x)` with polynomials `P_r`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentPoly {
    pub degree: usize,
    pub basis: TimeBasis,
    /// `terms[r]` are the `x`-coefficients of `P_r`.
    pub terms: Vec<Vec<f64>>,
}

impl MomentPoly {
    /// CIR moments, the closed-form solution of the triangular system
    /// `m_p′ = p(θκ + σ²(p−1)/2) m_{p−1} − pθ m_p`, `m_p(0) = x^p`.
    ///
    /// Written as `e^{−pθt} Σ_r φ(t)^r P_r(x)` where `Σ_r τ^r P_r(x)` solves
    /// the BESQ system with `δ = 4θκ/σ²`: substituting shows the integrating
    /// factor `e^{pθt}` turns one system into the other.
    pub fn cir(params: &CirParams, p: usize) -> Self {
        let theta = params.theta;
        let c = params.sigma * params.sigma / (4.0 * theta);
        Self { degree: p, basis: TimeBasis::Cir { theta, c, p }, terms: Self::besq(params.delta, p).terms }
    }

    /// BESQ moments from `m_p′ = p(δ + 2p − 2) m_{p−1}`, `m_p(0) = x^p`.
    pub fn besq(delta: f64, p: usize) -> Self {
        // terms[r][s] multiplies t^r x^s.
        let mut terms = vec![vec![1.0]];
        for q in 1..=p {
            let rate = q as f64 * (delta + 2.0 * q as f64 - 2.0);
            let mut next = vec![vec![0.0; q + 1]; q + 1];
            next[0][q] = 1.0;
            for (r, row) in terms.iter().enumerate() {
                for (s, &c) in row.iter().enumerate() {
                    next[r + 1][s] += rate * c / (r + 1) as f64;
                }
            }
            terms = next;
        }
        Self { degree: p, basis: TimeBasis::Power, terms }
    }

    pub fn eval(&self, t: f64, x: f64) -> f64 {
        self.deriv(t, x, 0, 0)
    }

    /// `∂_x^j ∂_t^i m_p(t, x)`.
    pub fn deriv(&self, t: f64, x: f64, j: usize, i: usize) -> f64 {
        self.terms
            .iter()
            .enumerate()
            .map(|(k, coeffs)| self.basis.deriv(k, i, t) * poly_eval(&poly_deriv(coeffs, j), x))
            .sum()
    }

    /// `x`-coefficients of `m_p(t, ·)`.
    pub fn x_coeffs(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.degree + 1];
        for (k, coeffs) in self.terms.iter().enumerate() {
            let w = self.basis.deriv(k, 0, t);
            for (o, c) in out.iter_mut().zip(coeffs) {
                *o += w * c;
            }
        }
        out
    }
}

/// `E X_t(x)^p`.
pub fn cir_moment(params: &CirParams, t: f64, x: f64, p: usize) -> f64 {
    MomentPoly::cir(params, p).eval(t, x)
}

/// `E Y^δ_t(x)^p`.
pub fn besq_moment(delta: f64, t: f64, x: f64, p: usize) -> f64 {
    MomentPoly::besq(delta, p).eval(t, x)
}
