//! The symmetrized quotient `g` and its x-derivatives, including the limit at
//! the origin and the polynomial growth bound.

use kolmocir::gfun::{coeffs, g_deriv, g_growth_bound, g_limit_at_zero, GFunArgs};
use kolmocir::SmoothTestFn;

fn main() -> kolmocir::Result<()> {
    for l in 1..=4 {
        println!("coefficient row {l}: {:?}", coeffs(l));
    }
    let f: SmoothTestFn = "exp_neg:1".parse().unwrap();
    let (a, b) = (0.6, 0.3);
    println!("{:>6} {:>14} {:>14} {:>14}", "x", "g_1", "g_1 limit", "bound");
    for x in [0.0, 1e-6, 1e-3, 0.1, 1.0, 5.0] {
        let args = GFunArgs::new(x, a, b)?;
        println!(
            "{x:>6} {:>14.10} {:>14.10} {:>14.6}",
            g_deriv(&f, 1, args)?,
            g_limit_at_zero(&f, 1, a, b)?,
            g_growth_bound(&f, 1, args)?
        );
    }
    Ok(())
}
