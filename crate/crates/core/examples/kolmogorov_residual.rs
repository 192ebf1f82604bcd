//! Residual of the backward Kolmogorov equation `∂_t u = Au` on the standard
//! grid, from Monte Carlo and from the closed form.

use kolmocir::verify::{verify_pde, Grid};
use kolmocir::{CirParams, EstimatorConfig, SmoothTestFn};

fn main() -> kolmocir::Result<()> {
    let params = CirParams::new(1.0, 1.0, 1.0)?;
    let cfg = EstimatorConfig::new(100_000, 5);
    for name in ["poly:0,0,1", "exp_neg:1", "sin:1"] {
        let f: SmoothTestFn = name.parse().unwrap();
        let report = verify_pde(&f, &params, &Grid::standard(), &cfg)?;
        let oracle = report.children.first().map(|c| format!("{:.1e}", c.worst_stat));
        println!(
            "{name:<12} worst |r|/(4 se) = {:.3}  oracle residual = {}  pass = {}",
            report.worst_stat,
            oracle.as_deref().unwrap_or("n/a"),
            report.all_pass()
        );
    }
    Ok(())
}
