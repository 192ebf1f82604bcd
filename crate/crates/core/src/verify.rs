//! Executable checks: Kolmogorov residual, growth bounds, the semigroup
//! identity and the affine-mixture moment audit.
//!
//! Statistical checks report `|estimate − target| / (4·stderr)` and pass at
//! tolerance 1. A zero numerator with zero error counts as 0.

use std::collections::BTreeMap;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::deriv::{
    clock_generator, clock_transform, estimate_mixed, estimate_u, growth_envelope, PathEvaluator,
};
use crate::error::{Error, Result};
use crate::gfun::NodeTable;
use crate::mc::{run_paths, EstimatorConfig};
use crate::model::{CirParams, DerivRequest, Derivatives, FnKind, SmoothTestFn};
use crate::oracle::{besq_moment, deriv_exact, u_exact};
use crate::sampler::{BesqSampler, Method, MixtureSplit};

/// Step of the common-random-number time difference in [`verify_pde`].
pub const PDE_TIME_STEP: f64 = 1e-3;
/// Step of the time difference applied to closed-form oracles.
pub const ORACLE_TIME_STEP: f64 = 1e-4;
/// Absolute tolerance of the oracle residual.
pub const ORACLE_TOLERANCE: f64 = 1e-6;
/// Inner paths per outer path in the nested semigroup check.
pub const SEMIGROUP_INNER_PATHS: usize = 100;

/// Result of one check over a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub check: String,
    pub grid: String,
    pub worst_stat: f64,
    pub tolerance: f64,
    pub pass: bool,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Scalar by-products such as fitted constants.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extras: BTreeMap<String, f64>,
    /// Companion checks run alongside this one.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub children: Vec<VerifyReport>,
}

impl VerifyReport {
    /// Builds a report whose statistic is column `stat_col` of `rows`.
    pub fn new(
        check: &str,
        grid: String,
        tolerance: f64,
        columns: &[&str],
        rows: Vec<Vec<f64>>,
        stat_col: usize,
    ) -> Self {
        let worst_stat = rows.iter().map(|r| r[stat_col]).fold(0.0, nan_max);
        Self::with_stat(check, grid, tolerance, columns, rows, worst_stat)
    }

    pub fn with_stat(
        check: &str,
        grid: String,
        tolerance: f64,
        columns: &[&str],
        rows: Vec<Vec<f64>>,
        worst_stat: f64,
    ) -> Self {
        Self {
            check: check.into(),
            grid,
            worst_stat,
            tolerance,
            pass: worst_stat <= tolerance,
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows,
            extras: BTreeMap::new(),
            children: Vec::new(),
        }
    }

    /// This check and every companion passed.
    pub fn all_pass(&self) -> bool {
        self.pass && self.children.iter().all(VerifyReport::all_pass)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "{}", self.columns.join(","))?;
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

fn nan_max(a: f64, b: f64) -> f64 {
    if a.is_nan() || b.is_nan() {
        f64::NAN
    } else {
        a.max(b)
    }
}

/// `|gap| / (4·se)` with `0/0 = 0`.
pub fn z_stat(gap: f64, se: f64) -> f64 {
    if gap == 0.0 {
        0.0
    } else {
        gap.abs() / (4.0 * se)
    }
}

/// A `(t, x)` product grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub ts: Vec<f64>,
    pub xs: Vec<f64>,
}

impl Grid {
    /// `t ∈ {0.25, 0.5, 1}`, `x ∈ {0, 0.5, 1, 2, 5}`.
    pub fn standard() -> Self {
        Self { ts: vec![0.25, 0.5, 1.0], xs: vec![0.0, 0.5, 1.0, 2.0, 5.0] }
    }

    pub fn points(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.ts.iter().flat_map(move |&t| self.xs.iter().map(move |&x| (t, x)))
    }

    pub fn describe(&self) -> String {
        format!("t={:?} x={:?}", self.ts, self.xs)
    }
}

/// Residual of `∂_t u = Au` on a grid.
///
/// `∂_t u` is a common-random-number central difference in `t` with step
/// [`PDE_TIME_STEP`]; `∂_x u` and `∂²_x u` come from the symmetrized
/// estimators evaluated on the same draw. For polynomial and `exp_neg`
/// test functions a companion check applies the same residual to the
/// closed-form oracle.
pub fn verify_pde(
    f: &SmoothTestFn,
    params: &CirParams,
    grid: &Grid,
    cfg: &EstimatorConfig,
) -> Result<VerifyReport> {
    DerivRequest::new(0, 1).check(f.q(), cfg.smoothness)?;
    let h = PDE_TIME_STEP;
    if let Some(&t) = grid.ts.iter().find(|&&t| !(t >= h)) {
        return Err(Error::InvalidArgument(format!("residual grid needs t >= {h}, got {t}")));
    }
    let gen = clock_generator(params, cfg.clock);
    let eval = PathEvaluator::new(f, params.delta, cfg.method, 0, 2)?;
    let mut rows = Vec::new();
    for (t, x) in grid.points() {
        let (tau, scale) = clock_transform(params, cfg.clock, t);
        let (tau_up, scale_up) = clock_transform(params, cfg.clock, t + h);
        let (tau_dn, scale_dn) = clock_transform(params, cfg.clock, t - h);
        let m = run_paths(cfg, 4, NodeTable::default, |table, stream, row| {
            let unit = eval.sampler().draw_unit(stream);
            let mut d = [0.0; 3];
            eval.eval(table, &unit.at(tau, x), x, scale, &mut d);
            let up = f.eval(scale_up * unit.at(tau_up, x).value);
            let dn = f.eval(scale_dn * unit.at(tau_dn, x).value);
            let dt = (up - dn) / (2.0 * h);
            row[0] = dt - gen.apply(x, d[1], d[2]);
            row[1] = dt;
            row[2] = d[1];
            row[3] = d[2];
        })?;
        let se = m.stderr(0);
        rows.push(vec![t, x, m.mean[0], se, z_stat(m.mean[0], se), m.mean[1], m.mean[2], m.mean[3]]);
    }
    let mut report = VerifyReport::new(
        "pde",
        grid.describe(),
        1.0,
        &["t", "x", "residual", "stderr", "stat", "dt", "dx1", "dx2"],
        rows,
        4,
    );
    if let Some(child) = oracle_pde_residual(f, params, grid, cfg)? {
        report.children.push(child);
    }
    Ok(report)
}

/// The residual of the closed-form solution, `None` when no closed form exists.
pub fn oracle_pde_residual(
    f: &SmoothTestFn,
    params: &CirParams,
    grid: &Grid,
    cfg: &EstimatorConfig,
) -> Result<Option<VerifyReport>> {
    let clock = cfg.clock;
    if u_exact(f, params, clock, 1.0, 1.0).is_none() {
        return Ok(None);
    }
    let h = ORACLE_TIME_STEP;
    let gen = clock_generator(params, clock);
    let mut rows = Vec::new();
    for (t, x) in grid.points() {
        if t < 2.0 * h {
            return Err(Error::InvalidArgument(format!("oracle residual needs t >= {}, got {t}", 2.0 * h)));
        }
        let u = |s: f64| u_exact(f, params, clock, s, x).expect("closed form");
        // Fourth-order central stencil: the second-order one leaves an
        // O(h²·∂³_t u) error that exceeds the tolerance for cubic f.
        let dt = (8.0 * (u(t + h) - u(t - h)) - (u(t + 2.0 * h) - u(t - 2.0 * h))) / (12.0 * h);
        let d1 = deriv_exact(f, params, clock, t, x, 1, 0).expect("closed form");
        let d2 = deriv_exact(f, params, clock, t, x, 2, 0).expect("closed form");
        let r = dt - gen.apply(x, d1, d2);
        rows.push(vec![t, x, r, r.abs()]);
    }
    Ok(Some(VerifyReport::new(
        "pde-oracle",
        grid.describe(),
        ORACLE_TOLERANCE,
        &["t", "x", "residual", "abs_residual"],
        rows,
        3,
    )))
}

/// Polynomial-growth check of `∂_x^j ∂_t^i u(t, ·)` on an `x` grid.
///
/// `(C, k)` come from [`growth_envelope`]. The statistic is
/// `max(sup ratio / C, drift / 2)` where the ratio is `|estimate|/(1+x^k)`
/// and `drift` is the largest ratio over the top decade of the grid divided
/// by the ratio at the start of that decade, each moved by four standard
/// errors against the drift.
pub fn verify_growth(
    f: &SmoothTestFn,
    params: &CirParams,
    req: DerivRequest,
    t: f64,
    x_grid: &[f64],
    cfg: &EstimatorConfig,
) -> Result<VerifyReport> {
    if x_grid.is_empty() {
        return Err(Error::InvalidArgument("empty x grid".into()));
    }
    let (c, k) = growth_envelope(f, params, t, req, cfg)?;
    let mut rows = Vec::new();
    for &x in x_grid {
        let e = estimate_mixed(f, params, t, x, req, cfg)?;
        let ratio = e.mean.abs() / (1.0 + x.powi(k as i32));
        rows.push(vec![x, e.mean, e.stderr, ratio]);
    }
    let sup = rows.iter().map(|r| r[3]).fold(0.0, nan_max);
    let x_max = x_grid.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut top: Vec<&Vec<f64>> = rows.iter().filter(|r| r[0] >= 0.1 * x_max).collect();
    top.sort_by(|a, b| a[0].total_cmp(&b[0]));
    // Ratios shifted by four standard errors towards the least drift, so a
    // starting ratio dominated by noise cannot fake growth.
    let shifted = |r: &Vec<f64>, sign: f64| (r[1].abs() + sign * 4.0 * r[2]).max(0.0) / (1.0 + r[0].powi(k as i32));
    let start = shifted(top[0], 1.0);
    let top_max = top.iter().map(|r| shifted(r, -1.0)).fold(0.0, nan_max);
    let drift = if top_max == 0.0 { 0.0 } else { top_max / start };
    let bound_stat = if sup == 0.0 { 0.0 } else { sup / c };
    let mut report = VerifyReport::with_stat(
        "growth",
        format!("t={t} j={} i={} x={x_grid:?}", req.j, req.i),
        1.0,
        &["x", "mean", "stderr", "ratio"],
        rows,
        nan_max(bound_stat, 0.5 * drift),
    );
    report.extras.insert("C".into(), c);
    report.extras.insert("k".into(), f64::from(k));
    report.extras.insert("sup_ratio".into(), sup);
    report.extras.insert("top_decade_drift".into(), drift);
    Ok(report)
}

/// `u(t+s, x) = E u(t, X_s(x))` on an `x` grid.
///
/// For polynomial `f` the left side and the inner expectation are exact;
/// otherwise both use Monte Carlo, the inner one with
/// [`SEMIGROUP_INNER_PATHS`] draws per outer path.
pub fn verify_semigroup(
    f: &SmoothTestFn,
    params: &CirParams,
    t: f64,
    s: f64,
    x_grid: &[f64],
    cfg: &EstimatorConfig,
) -> Result<VerifyReport> {
    if !(t >= 0.0 && s >= 0.0) {
        return Err(Error::InvalidArgument(format!("semigroup needs t, s >= 0, got t={t}, s={s}")));
    }
    let polynomial = matches!(f.kind(), FnKind::Poly(_));
    let sampler = BesqSampler::new(params.delta, cfg.method)?;
    let (tau_s, scale_s) = clock_transform(params, cfg.clock, s);
    let (tau_t, scale_t) = clock_transform(params, cfg.clock, t);
    let mut rows = Vec::new();
    for &x in x_grid {
        let (lhs, lhs_se) = if polynomial {
            (u_exact(f, params, cfg.clock, t + s, x).expect("polynomial oracle"), 0.0)
        } else {
            let e = estimate_u(f, params, t + s, x, cfg)?;
            (e.mean, e.stderr)
        };
        let (rhs, rhs_se) = if s == 0.0 {
            (lhs, lhs_se)
        } else {
            let m = run_paths(cfg, 1, || (), |_, stream, row| {
                let mid = scale_s * sampler.draw_unit(stream).at(tau_s, x).value;
                row[0] = if polynomial {
                    u_exact(f, params, cfg.clock, t, mid).expect("polynomial oracle")
                } else if t == 0.0 {
                    f.eval(mid)
                } else {
                    let total: f64 = (0..SEMIGROUP_INNER_PATHS)
                        .map(|_| f.eval(scale_t * sampler.draw_unit(stream).at(tau_t, mid).value))
                        .sum();
                    total / SEMIGROUP_INNER_PATHS as f64
                };
            })?;
            (m.mean[0], m.stderr(0))
        };
        let gap = lhs - rhs;
        let se = if s == 0.0 { 0.0 } else { lhs_se.hypot(rhs_se) };
        let stat = if s == 0.0 { 0.0 } else { z_stat(gap, se) };
        rows.push(vec![x, lhs, lhs_se, rhs, rhs_se, stat]);
    }
    Ok(VerifyReport::new(
        "semigroup",
        format!("t={t} s={s} x={x_grid:?}"),
        1.0,
        &["x", "lhs", "lhs_stderr", "rhs", "rhs_stderr", "stat"],
        rows,
        5,
    ))
}

/// Compares the first four moments of the affine mixture
/// `λ₁ BESQⁿ + λ₂ BESQⁿ⁺¹` with those of `BESQ^δ`.
///
/// Rows are the mean, the variance and the raw third and fourth moments,
/// each with `gap = truth − empirical`, its standard error and the
/// interval `gap ± 4·se`.
pub fn mixture_audit(delta: f64, t: f64, x: f64, cfg: &EstimatorConfig) -> Result<VerifyReport> {
    let split = MixtureSplit::new(delta)?;
    if !(t >= 0.0 && x >= 0.0) {
        return Err(Error::InvalidArgument(format!("audit needs t, x >= 0, got t={t}, x={x}")));
    }
    let sampler = BesqSampler::new(delta, Method::Mix)?;
    let m = run_paths(cfg, 4, || (), |_, stream, row| {
        let y = sampler.draw_unit(stream).at(t, x).value;
        let y2 = y * y;
        row.copy_from_slice(&[y, y2, y2 * y, y2 * y2]);
    })?;
    let n = m.n as f64;
    let truth: Vec<f64> = (1..=4).map(|p| besq_moment(delta, t, x, p)).collect();
    let (e1, e2, e3, e4) = (m.mean[0], m.mean[1], m.mean[2], m.mean[3]);
    let var_emp = m.variance(0);
    let mu4 = e4 - 4.0 * e1 * e3 + 6.0 * e1 * e1 * e2 - 3.0 * e1.powi(4);
    let var_se = ((mu4 - var_emp * var_emp).max(0.0) / n).sqrt();
    let entries = [
        (1.0, truth[0], e1, m.stderr(0)),
        (2.0, truth[1] - truth[0] * truth[0], var_emp, var_se),
        (3.0, truth[2], e3, m.stderr(2)),
        (4.0, truth[3], e4, m.stderr(3)),
    ];
    let rows = entries
        .iter()
        .map(|&(k, truth, emp, se)| {
            let gap = truth - emp;
            vec![k, truth, emp, gap, se, gap - 4.0 * se, gap + 4.0 * se, z_stat(gap, se)]
        })
        .collect();
    let mut report = VerifyReport::new(
        "mixture",
        format!("delta={delta} t={t} x={x}"),
        1.0,
        &["moment", "truth", "empirical", "gap", "stderr", "ci_lo", "ci_hi", "stat"],
        rows,
        7,
    );
    report.extras.insert("n".into(), f64::from(split.n));
    report.extras.insert("lambda1".into(), split.lambda1);
    report.extras.insert("lambda2".into(), split.lambda2);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> CirParams {
        CirParams::new(1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn constant_function_residual_is_exactly_zero() {
        let f: SmoothTestFn = "poly:2".parse().unwrap();
        let r = verify_pde(&f, &params(), &Grid::standard(), &EstimatorConfig::new(500, 1)).unwrap();
        assert_eq!(r.worst_stat, 0.0);
        assert!(r.rows.iter().all(|row| row[2] == 0.0 && row[3] == 0.0));
        assert!(r.all_pass());
    }

    #[test]
    fn semigroup_at_zero_lag_is_exact() {
        for name in ["poly:0,0,1", "sin:1"] {
            let f: SmoothTestFn = name.parse().unwrap();
            let r = verify_semigroup(&f, &params(), 0.5, 0.0, &[0.0, 1.0], &EstimatorConfig::new(200, 3)).unwrap();
            assert_eq!(r.worst_stat, 0.0, "{name}");
        }
    }

    #[test]
    fn report_pass_flag_tracks_statistic() {
        let r = VerifyReport::new("x", String::new(), 1.0, &["a", "s"], vec![vec![0.0, 0.5], vec![1.0, 1.5]], 1);
        assert_eq!(r.worst_stat, 1.5);
        assert!(!r.pass);
        let r = VerifyReport::new("x", String::new(), 1.0, &["s"], vec![vec![f64::NAN]], 0);
        assert!(!r.pass);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "s\nNaN\n");
    }

    #[test]
    fn mixture_audit_rejects_integer_dimension() {
        assert!(matches!(
            mixture_audit(2.0, 1.0, 1.0, &EstimatorConfig::new(10, 0)),
            Err(Error::AffineMixOnInteger(_))
        ));
    }
}
