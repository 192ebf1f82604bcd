//! Exponentially scaled modified Bessel functions of the first kind, in log space.

use statrs::function::gamma::ln_gamma;

/// Argument at which the power series hands over to the asymptotic expansion.
pub const ASYMPTOTIC_SWITCH: f64 = 30.0;

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln I_ν(z) − z` from the power series `Σ (z/2)^{2k+ν} / (k! Γ(k+ν+1))`.
fn ln_ive_series(nu: f64, z: f64) -> f64 {
    let half = 0.5 * z;
    let log_q = 2.0 * half.ln();
    let mut log_term = nu * half.ln() - ln_gamma(nu + 1.0);
    let mut log_sum = log_term;
    for k in 1..10_000 {
        let kf = k as f64;
        log_term += log_q - kf.ln() - (kf + nu).ln();
        log_sum = log_add(log_sum, log_term);
        if log_term < log_sum - 40.0 && kf > half {
            break;
        }
    }
    log_sum - z
}

/// `ln I_ν(z) − z` from `e^z/√(2πz) Σ (−1)^k a_k(ν)/z^k`.
fn ln_ive_asymptotic(nu: f64, z: f64) -> Option<f64> {
    let mu = 4.0 * nu * nu;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = -term * (mu - (2.0 * kf - 1.0).powi(2)) / (kf * 8.0 * z);
        if next.abs() > term.abs() {
            return None;
        }
        term = next;
        sum += term;
        if term.abs() < 1e-17 * sum.abs() {
            return Some(sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * z).ln());
        }
    }
    None
}

/// `ln(I_ν(z)·e^{−z})` for `ν > −1`, `z ≥ 0`.
pub fn ln_bessel_ive(nu: f64, z: f64) -> f64 {
    debug_assert!(nu > -1.0 && z >= 0.0);
    if z == 0.0 {
        return if nu == 0.0 { 0.0 } else { f64::NEG_INFINITY };
    }
    if z >= ASYMPTOTIC_SWITCH && nu * nu <= z {
        if let Some(v) = ln_ive_asymptotic(nu, z) {
            return v;
        }
    }
    ln_ive_series(nu, z)
}

/// `I_ν(z)`; overflows to infinity for large `z`.
pub fn bessel_i(nu: f64, z: f64) -> f64 {
    (ln_bessel_ive(nu, z) + z).exp()
}
