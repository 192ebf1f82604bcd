//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::time::{Duration, Instant};

use kolmocir::cli::main_with_args;
use kolmocir::deriv::estimate_dx;
use kolmocir::gfun::{coeffs, g_deriv, GFunArgs};
use kolmocir::mc::run_paths;
use kolmocir::model::Derivatives;
use kolmocir::oracle::MomentPoly;
use kolmocir::rng::RngStream;
use kolmocir::sampler::BesqSampler;
use kolmocir::verify::{mixture_audit, verify_growth, verify_pde, Grid};
use kolmocir::{CirParams, DerivRequest, EstimatorConfig, Method, SmoothTestFn};

const SEED: u64 = 42;

struct Outcome {
    pass: bool,
    detail: String,
}

fn func(name: &str) -> SmoothTestFn {
    name.parse().unwrap()
}

fn coefficient_fidelity() -> Outcome {
    let displayed: [&[u64]; 4] = [&[2, 4], &[2, 8, 8], &[2, 12, 24, 16], &[2, 16, 48, 64, 32]];
    let rows_ok = displayed.iter().enumerate().all(|(l, row)| coeffs(l + 1) == *row);
    let f = func("exp_neg:1");
    let mut worst: f64 = 0.0;
    for &(x, a, b) in &[(0.5, 0.3, 0.2), (1.0, -0.7, 0.0), (2.0, 0.9, 1.1), (4.0, 0.1, 0.5)] {
        let h = 1e-4 * x;
        let at = |x: f64, l| g_deriv(&f, l, GFunArgs::new(x, a, b).unwrap()).unwrap();
        let fd = (at(x + h, 3) - at(x - h, 3)) / (2.0 * h);
        let exact = at(x, 4);
        worst = worst.max((fd - exact).abs() / (1e-3 + exact.abs()));
    }
    Outcome {
        pass: rows_ok && worst <= 1e-5,
        detail: format!("rows 1-4 exact: {rows_ok}; row 4 vs finite difference rel err {worst:.2e}"),
    }
}

fn g_limit_fidelity() -> Outcome {
    let f = func("exp_neg:1");
    let mut s = RngStream::new(SEED, 0, 0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let a = 4.0 * (s.uniform_open0() - 0.5);
        let b = 3.0 * s.uniform_open0();
        let big_a = a * a + b;
        let d = |n| f.deriv(n, big_a);
        let args = GFunArgs::new(0.0, a, b).unwrap();
        let g1 = 4.0 * a * d(2) + 8.0 * a.powi(3) / 3.0 * d(3);
        let g2 = 4.0 * a * d(3) + 16.0 * a.powi(3) * d(4) / 3.0 + 16.0 * a.powi(5) * d(5) / 15.0;
        worst = worst.max((g_deriv(&f, 1, args).unwrap() - g1).abs());
        worst = worst.max((g_deriv(&f, 2, args).unwrap() - g2).abs());
    }
    Outcome { pass: worst <= 1e-10, detail: format!("max abs deviation {worst:.2e} over 10 draws") }
}

fn sampler_moments() -> Outcome {
    let cfg = EstimatorConfig::new(200_000, SEED);
    let mut worst: f64 = 0.0;
    for &delta in &[1.0, 1.5, 2.0, 3.0, 3.84, 7.0] {
        let sampler = BesqSampler::new(delta, Method::Gamma).unwrap();
        for &t in &[0.25, 1.0] {
            for &x in &[0.0, 1.0, 5.0] {
                let mean = x + delta * t;
                let var = 4.0 * x * t + 2.0 * delta * t * t;
                let m = run_paths(&cfg, 2, || (), |_, stream, row| {
                    let v = sampler.sample(t, x, stream).value;
                    row[0] = v;
                    row[1] = (v - mean).powi(2);
                })
                .unwrap();
                worst = worst.max((m.mean[0] - mean).abs() / (4.0 * m.stderr(0)));
                worst = worst.max((m.mean[1] - var).abs() / (4.0 * m.stderr(1)));
            }
        }
    }
    Outcome { pass: worst <= 1.0, detail: format!("worst |gap|/(4 se) {worst:.3} over 36 cells") }
}

fn derivative_vs_oracle() -> Outcome {
    let p = CirParams::new(1.2, 0.8, 1.0).unwrap();
    let cfg = EstimatorConfig::new(200_000, SEED);
    let (linear, square) = (func("poly:0,1"), func("poly:0,0,1"));
    let oracle = MomentPoly::cir(&p, 2);
    let (mut worst, mut worst_se): (f64, f64) = (0.0, 0.0);
    for &t in &[0.25, 0.5, 1.0] {
        for &x in &[0.0, 1.0, 5.0] {
            let e = estimate_dx(&linear, &p, t, x, 1, &cfg).unwrap();
            worst = worst.max((e.mean - (-p.theta * t).exp()).abs() / (4.0 * e.stderr).max(1e-15));
            worst_se = worst_se.max(e.stderr);
            for j in 1..=2 {
                let e = estimate_dx(&square, &p, t, x, j, &cfg).unwrap();
                let truth = oracle.deriv(t, x, j, 0);
                worst = worst.max((e.mean - truth).abs() / (4.0 * e.stderr).max(1e-15 * truth.abs().max(1.0)));
            }
        }
    }
    Outcome {
        pass: worst <= 1.0 && worst_se <= 5e-3,
        detail: format!("worst |gap|/(4 se) {worst:.3}; linear stderr max {worst_se:.2e}"),
    }
}

fn pde_residual() -> Outcome {
    let p = CirParams::new(1.0, 1.0, 1.0).unwrap();
    let cfg = EstimatorConfig::new(200_000, SEED);
    let mut worst: f64 = 0.0;
    let mut oracle_exp = f64::NAN;
    for name in ["poly:0,1", "poly:0,0,1", "exp_neg:1"] {
        let report = verify_pde(&func(name), &p, &Grid::standard(), &cfg).unwrap();
        worst = worst.max(report.worst_stat);
        if name == "exp_neg:1" {
            oracle_exp = report.children.first().map_or(f64::NAN, |c| c.worst_stat);
        }
    }
    Outcome {
        pass: worst <= 1.0 && oracle_exp <= 1e-6,
        detail: format!("worst MC statistic {worst:.3}; exp_neg oracle residual {oracle_exp:.2e}"),
    }
}

fn growth_bounds() -> Outcome {
    let p = CirParams::new(1.0, 1.0, 1.0).unwrap();
    let cfg = EstimatorConfig::new(200_000, SEED);
    let xs: Vec<f64> = (0..=25).map(|i| 2.0 * i as f64).collect();
    let r = verify_growth(&func("poly:0,0,0,1"), &p, DerivRequest::new(1, 0), 0.5, &xs, &cfg).unwrap();
    let (c, sup) = (r.extras["C"], r.extras["sup_ratio"]);
    Outcome {
        pass: sup.is_finite() && sup <= c && r.pass,
        detail: format!("sup ratio {sup:.3} <= C {c:.3} with k {}", r.extras["k"]),
    }
}

fn zero_regularity() -> Outcome {
    let p = CirParams::new(1.2, 0.8, 1.0).unwrap();
    let cfg = EstimatorConfig::new(20_000, SEED);
    let catalog = ["poly:1,-2,0.5,0.25", "poly:0,0,0,1", "exp_neg:1", "exp_neg:2.5", "sin:1", "sin:0.7"];
    let mut bad = Vec::new();
    for name in catalog {
        let f = func(name);
        for j in 1..=2 {
            let e = estimate_dx(&f, &p, 0.5, 0.0, j, &cfg).unwrap();
            if !(e.mean.is_finite() && e.stderr.is_finite()) {
                bad.push(format!("{name} j={j}"));
            }
        }
        for l in 0..=3 {
            for &(a, b) in &[(0.0, 0.0), (0.7, 0.0), (-1.3, 0.4)] {
                if !g_deriv(&f, l, GFunArgs::new(0.0, a, b).unwrap()).unwrap().is_finite() {
                    bad.push(format!("{name} g{l}({a},{b})"));
                }
            }
        }
    }
    Outcome {
        pass: bad.is_empty(),
        detail: if bad.is_empty() { "all 6 functions finite at x=0".into() } else { bad.join("; ") },
    }
}

fn mixture() -> Outcome {
    let cfg = EstimatorConfig::new(200_000, SEED).with_method(Method::Mix);
    let r = mixture_audit(1.5, 1.0, 1.0, &cfg).unwrap();
    let col = |name| r.column(name).unwrap();
    let (gap, se, lo, hi) = (col("gap"), col("stderr"), col("ci_lo"), col("ci_hi"));
    let mean_ok = lo[0] <= 0.0 && 0.0 <= hi[0];
    let var_ok = !(lo[1] <= 0.0 && 0.0 <= hi[1]) && (gap[1] - 3.5).abs() <= 4.0 * se[1];
    Outcome {
        pass: mean_ok && var_ok,
        detail: format!("mean gap {:.4} +- {:.4}; variance gap {:.4} +- {:.4}", gap[0], se[0], gap[1], se[1]),
    }
}

fn cli_summary(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = main_with_args(std::iter::once("kolmocir").chain(args.iter().copied()), &mut out, &mut err);
    (code, String::from_utf8(out).unwrap())
}

fn reproducibility() -> Outcome {
    let runs: [&[&str]; 5] = [
        &["deriv", "--f", "exp_neg:1", "--j", "2", "--paths", "20000", "--seed", "9"],
        &["verify-pde", "--f", "poly:0,0,1", "--paths", "10000", "--seed", "9"],
        &["verify-semigroup", "--f", "sin:1", "--paths", "2000", "--seed", "9"],
        &["mix-audit", "--delta", "1.5", "--paths", "20000", "--seed", "9"],
        &["sample", "--delta", "2.5", "--paths", "50", "--seed", "9"],
    ];
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let multi = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let mut mismatches = Vec::new();
    for args in runs {
        let first = cli_summary(args);
        let second = cli_summary(args);
        let one = single.install(|| cli_summary(args));
        let four = multi.install(|| cli_summary(args));
        if first != second || first != one || first != four || first.1.is_empty() {
            mismatches.push(args[0]);
        }
    }
    Outcome {
        pass: mismatches.is_empty(),
        detail: if mismatches.is_empty() {
            "5 subcommands bit-identical across reruns and 1/4 thread pools".into()
        } else {
            format!("differs: {}", mismatches.join(", "))
        },
    }
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("coefficient fidelity", Duration::from_secs(1), coefficient_fidelity),
        ("g limit at zero", Duration::from_secs(1), g_limit_fidelity),
        ("sampler moments", Duration::from_secs(30), sampler_moments),
        ("derivative vs oracle", Duration::from_secs(60), derivative_vs_oracle),
        ("pde residual", Duration::from_secs(90), pde_residual),
        ("growth bounds", Duration::from_secs(30), growth_bounds),
        ("regularity at x=0", Duration::from_secs(60), zero_regularity),
        ("mixture audit", Duration::from_secs(20), mixture),
        ("reproducibility", Duration::from_secs(120), reproducibility),
    ];
    let mut failed = 0;
    for (n, (name, budget, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let pass = outcome.pass && elapsed <= *budget;
        if !pass {
            failed += 1;
        }
        println!(
            "criterion {}: {} {name}: {} ({:.2}s, budget {}s)",
            n + 1,
            if pass { "PASS" } else { "FAIL" },
            outcome.detail,
            elapsed.as_secs_f64(),
            budget.as_secs()
        );
    }
    println!("acceptance: {} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
