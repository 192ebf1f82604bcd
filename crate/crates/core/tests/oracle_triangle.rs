use kolmocir::deriv::estimate_u;
use kolmocir::mc::{run_paths, Moments};
use kolmocir::oracle::{cir_laplace, cir_moment, density_u, gaussian_abs_moment, QuadConfig};
use kolmocir::rng::RngStream;
use kolmocir::sampler::{sample_besq, sample_besq_int, sample_cir, BesqSampler};
use kolmocir::{CirParams, EstimatorConfig, Method, SmoothTestFn};

const PARAM_SETS: [(f64, f64, f64); 4] = [(1.0, 1.0, 1.0), (1.2, 0.8, 1.0), (0.5, 2.0, 0.7), (2.0, 0.3, 1.5)];

fn params(theta: f64, kappa: f64, sigma: f64) -> CirParams {
    CirParams::new(theta, kappa, sigma).unwrap()
}

fn monomial(p: usize) -> SmoothTestFn {
    let mut coeffs = vec!["0"; p + 1];
    coeffs[p] = "1";
    format!("poly:{}", coeffs.join(",")).parse().unwrap()
}

#[test]
fn moments_density_and_monte_carlo_agree() {
    let quad = QuadConfig::default();
    let cfg = EstimatorConfig::new(100_000, 21);
    for (theta, kappa, sigma) in PARAM_SETS {
        let p = params(theta, kappa, sigma);
        for &(t, x) in &[(0.5, 1.0), (1.5, 0.0)] {
            for deg in 1..=3 {
                let moment = cir_moment(&p, t, x, deg);
                let density = density_u(|y| y.powi(deg as i32), &p, t, x, &quad).unwrap();
                assert!((moment - density).abs() <= 1e-8 * moment.max(1.0), "{p:?} p={deg}: {moment} vs {density}");
                let mc = estimate_u(&monomial(deg), &p, t, x, &cfg).unwrap();
                assert!((mc.mean - moment).abs() <= 4.0 * mc.stderr, "{p:?} p={deg}: {} ± {} vs {moment}", mc.mean, mc.stderr);
            }
        }
    }
}

#[test]
fn density_is_normalized_and_reproduces_the_laplace_transform() {
    let quad = QuadConfig::default();
    for (theta, kappa, sigma) in PARAM_SETS {
        let p = params(theta, kappa, sigma);
        for &(t, x) in &[(0.25, 0.0), (1.0, 2.0), (3.0, 0.4)] {
            let mass = density_u(|_| 1.0, &p, t, x, &quad).unwrap();
            assert!((mass - 1.0).abs() <= 1e-10, "{p:?} t={t} x={x}: mass {mass}");
            for lam in [0.3, 1.0, 4.0] {
                let exact = cir_laplace(&p, t, x, lam);
                let quadrature = density_u(|y| (-lam * y).exp(), &p, t, x, &quad).unwrap();
                assert!((exact - quadrature).abs() <= 1e-8, "{p:?} λ={lam}: {exact} vs {quadrature}");
            }
        }
    }
}

#[test]
fn laplace_transform_matches_monte_carlo() {
    let p = params(1.0, 1.0, 1.0);
    assert_eq!(cir_laplace(&p, 0.5, 1.0, 0.0), 1.0);
    assert!((cir_laplace(&p, 0.0, 1.3, 2.0) - (-2.6f64).exp()).abs() < 1e-15);
    let cfg = EstimatorConfig::new(200_000, 22);
    let mc = estimate_u(&"exp_neg:1".parse().unwrap(), &p, 0.5, 1.0, &cfg).unwrap();
    assert!((mc.mean - cir_laplace(&p, 0.5, 1.0, 1.0)).abs() <= 4.0 * mc.stderr);
}

#[test]
fn gaussian_absolute_moments() {
    assert_eq!(gaussian_abs_moment(0.0), 1.0);
    assert!((gaussian_abs_moment(1.0) - 1.0).abs() < 1e-14);
    assert!((gaussian_abs_moment(2.0) - 3.0).abs() < 1e-13);
    let cfg = EstimatorConfig::new(1_000_000, 23);
    let m = run_paths(&cfg, 3, || (), |_, stream, row| {
        let z2 = stream.normal().powi(2);
        row[0] = z2;
        row[1] = z2 * z2;
        row[2] = z2 * z2 * z2;
    })
    .unwrap();
    for p in 1..=3 {
        let exact = gaussian_abs_moment(p as f64);
        assert!((m.mean[p - 1] - exact).abs() <= 4.0 * m.stderr(p - 1), "p={p}: {} vs {exact}", m.mean[p - 1]);
    }
}

fn besq_moments(method: Method, delta: f64, t: f64, x: f64, n: u64, seed: u64) -> Moments {
    let cfg = EstimatorConfig::new(n, seed).with_method(method);
    let sampler = BesqSampler::new(delta, method).unwrap();
    run_paths(&cfg, 4, || (), |_, stream, row| {
        let v = sampler.sample(t, x, stream).value;
        row.iter_mut().enumerate().for_each(|(k, r)| *r = v.powi(k as i32 + 1));
    })
    .unwrap()
}

#[test]
fn gamma_and_explicit_squares_agree_for_integer_dimensions() {
    for delta in [2.0, 3.0, 5.0] {
        let gamma = besq_moments(Method::Gamma, delta, 0.7, 1.2, 100_000, 24);
        let squares = besq_moments(Method::Squares, delta, 0.7, 1.2, 100_000, 25);
        for k in 0..4 {
            let z = (gamma.mean[k] - squares.mean[k]).abs() / gamma.stderr(k).hypot(squares.stderr(k));
            assert!(z <= 4.0, "δ={delta} moment {}: z = {z}", k + 1);
        }
    }
}

#[test]
fn integer_sampler_examples() {
    let mut s = RngStream::new(26, 0, 0);
    assert_eq!(sample_besq_int(3, 0.0, 2.5, &mut s).unwrap().value, 2.5);
    let m = besq_moments(Method::Gamma, 2.0, 1.0, 1.0, 200_000, 27);
    assert!((m.mean[0] - 3.0).abs() <= 4.0 * m.stderr(0));
    let m = besq_moments(Method::Gamma, 3.0, 1.0, 0.0, 200_000, 28);
    let var = m.mean[1] - m.mean[0].powi(2);
    assert!((var - 6.0).abs() < 0.15, "variance {var}");
}

#[test]
fn one_dimensional_draws_are_a_single_square() {
    let mut s = RngStream::new(29, 0, 0);
    for _ in 0..100 {
        let d = sample_besq(1.0, 0.8, 2.0, &mut s, Method::Gamma).unwrap();
        assert_eq!(d.b, 0.0);
        assert!((d.value - (2f64.sqrt() + d.xi * 0.8f64.sqrt()).powi(2)).abs() < 1e-12);
    }
}

#[test]
fn cir_sampler_examples() {
    let mut s = RngStream::new(30, 0, 0);
    let p = params(1.0, 1.0, 1.0);
    assert_eq!(sample_cir(&p, 0.0, 0.9, &mut s, Method::Gamma).unwrap().value, 0.9);
    let cases = [(params(1.0, 1.0, 1.0), 2.0, 1.0, 1.0), (params(1.0, 2.0, 1.0), 1.0, 0.0, 2.0 * (1.0 - (-1f64).exp()))];
    for (p, t, x, truth) in cases {
        let cfg = EstimatorConfig::new(200_000, 31);
        let m = run_paths(&cfg, 1, || (), |_, stream, row| {
            let c = sample_cir(&p, t, x, stream, Method::Gamma).unwrap();
            row[0] = c.value;
            assert_eq!(c.value, c.scale * c.besq.value);
        })
        .unwrap();
        assert!((m.mean[0] - truth).abs() <= 4.0 * m.stderr(0), "{} vs {truth}", m.mean[0]);
    }
}
