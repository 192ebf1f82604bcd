//! Three independent routes to `E f(X_t(x))`: moment ODEs, quadrature against
//! the transition density, and Monte Carlo.

use kolmocir::deriv::estimate_u;
use kolmocir::oracle::{cir_laplace, cir_moment, density_u, QuadConfig};
use kolmocir::{CirParams, EstimatorConfig, SmoothTestFn};

fn main() -> kolmocir::Result<()> {
    let params = CirParams::new(0.5, 2.0, 0.7)?;
    let (t, x) = (1.0, 0.5);
    let quad = QuadConfig::default();
    let cfg = EstimatorConfig::new(200_000, 4);
    for (p, name) in [(1, "poly:0,1"), (2, "poly:0,0,1"), (3, "poly:0,0,0,1")] {
        let f: SmoothTestFn = name.parse().unwrap();
        let mc = estimate_u(&f, &params, t, x, &cfg)?;
        println!(
            "E X^{p}: moment {:.12}  density {:.12}  MC {:.5} ± {:.5}",
            cir_moment(&params, t, x, p),
            density_u(|y| y.powi(p as i32), &params, t, x, &quad)?,
            mc.mean,
            mc.stderr
        );
    }
    let f: SmoothTestFn = "exp_neg:1".parse().unwrap();
    let mc = estimate_u(&f, &params, t, x, &cfg)?;
    println!(
        "E e^-X: laplace {:.12}  density {:.12}  MC {:.5} ± {:.5}",
        cir_laplace(&params, t, x, 1.0),
        density_u(|y| (-y).exp(), &params, t, x, &quad)?,
        mc.mean,
        mc.stderr
    );
    Ok(())
}
