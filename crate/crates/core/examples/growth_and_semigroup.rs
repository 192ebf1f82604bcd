//! Polynomial growth of derivatives in `x` and the semigroup identity
//! `u(t+s, x) = E u(t, X_s(x))`.

use kolmocir::verify::{verify_growth, verify_semigroup, Grid};
use kolmocir::{CirParams, DerivRequest, EstimatorConfig, SmoothTestFn};

fn main() -> kolmocir::Result<()> {
    let params = CirParams::new(1.0, 1.0, 1.0)?;
    let cfg = EstimatorConfig::new(100_000, 6);
    let cubic: SmoothTestFn = "poly:0,0,0,1".parse().unwrap();
    let xs: Vec<f64> = (0..=10).map(|i| 5.0 * i as f64).collect();
    let r = verify_growth(&cubic, &params, DerivRequest::new(1, 0), 0.5, &xs, &cfg)?;
    println!("growth of d_x E X^3: C = {:.2}, k = {}, sup ratio = {:.3}", r.extras["C"], r.extras["k"], r.extras["sup_ratio"]);
    for row in &r.rows {
        println!("  x = {:>4}: {:>12.4} ratio {:.4}", row[0], row[1], row[3]);
    }

    let params = CirParams::new(1.2, 0.8, 1.0)?;
    for name in ["poly:0,0,1", "sin:1"] {
        let f: SmoothTestFn = name.parse().unwrap();
        let paths = if name.starts_with("poly") { 200_000 } else { 5_000 };
        let r = verify_semigroup(&f, &params, 0.25, 0.25, &Grid::standard().xs, &EstimatorConfig::new(paths, 7))?;
        println!("semigroup for {name}: worst statistic {:.3}, pass = {}", r.worst_stat, r.pass);
    }
    Ok(())
}
