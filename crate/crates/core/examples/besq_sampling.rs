//! Exact BESQ and CIR draws in each representation, with sample moments
//! against the closed forms.

use kolmocir::mc::run_paths;
use kolmocir::oracle::cir_moment;
use kolmocir::sampler::{sample_cir, BesqSampler};
use kolmocir::{CirParams, EstimatorConfig, Method};

fn main() -> kolmocir::Result<()> {
    let (delta, t, x) = (2.5, 1.0, 1.0);
    println!("BESQ^{delta}_{t}({x}): mean {} variance {}", x + delta * t, 4.0 * x * t + 2.0 * delta * t * t);
    for method in [Method::Gamma, Method::Squares, Method::Mix] {
        let sampler = BesqSampler::new(delta, method)?;
        let cfg = EstimatorConfig::new(200_000, 1).with_method(method);
        let m = run_paths(&cfg, 1, || (), |_, stream, row| row[0] = sampler.sample(t, x, stream).value)?;
        println!("  {method:?}: mean {:.4} ± {:.4}, variance {:.4}", m.mean[0], m.stderr(0), m.variance(0));
    }

    let params = CirParams::new(1.2, 0.8, 1.0)?;
    let cfg = EstimatorConfig::new(200_000, 2);
    let m = run_paths(&cfg, 1, || (), |_, stream, row| {
        row[0] = sample_cir(&params, 0.5, 0.7, stream, Method::Gamma).expect("valid point").value;
    })?;
    println!("CIR X_0.5(0.7): mean {:.4} ± {:.4}, exact {:.4}", m.mean[0], m.stderr(0), cir_moment(&params, 0.5, 0.7, 1));
    Ok(())
}
