//! Command-line front end.
//!
//! Every subcommand accepts the same flag set. `--config FILE` reads flat
//! `key=value` lines using the long flag names; flags given on the command
//! line win. Exit codes: 0 pass, 1 failed check, 2 usage or validation
//! error, 3 runtime error.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::deriv::{estimate_mixed, estimate_u};
use crate::error::Error;
use crate::gfun::{g_deriv, g_growth_bound, g_limit_at_zero, GFunArgs};
use crate::mc::{map_shards, Clock, EstimatorConfig};
use crate::model::{CirParams, DerivRequest, Derivatives, SmoothTestFn, SmoothnessRule};
use crate::oracle::{
    besq_expectation, besq_laplace, besq_moment, cir_laplace, cir_moment, density_u, deriv_exact,
    QuadConfig,
};
use crate::rng::RngStream;
use crate::sampler::{is_integer, BesqSampler, Method};
use crate::verify::{
    mixture_audit, verify_growth, verify_pde, verify_semigroup, z_stat, Grid, VerifyReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
pub const SEED_ENV: &str = "KOLMOCIR_SEED";
const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OracleKind {
    #[default]
    Moment,
    Laplace,
    Density,
}

/// Flags shared by all subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct Opts {
    /// Read defaults from a key=value file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub theta: Option<f64>,
    #[arg(long)]
    pub kappa: Option<f64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// BESQ dimension for `sample` and `mix-audit`.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Test function: poly:c0,c1,..., exp_neg:lambda or sin:omega.
    #[arg(long)]
    pub f: Option<String>,
    #[arg(long)]
    pub t: Option<f64>,
    /// Lag of the semigroup check.
    #[arg(long)]
    pub s: Option<f64>,
    #[arg(long)]
    pub x: Option<f64>,
    /// Spatial derivative order.
    #[arg(long)]
    pub j: Option<usize>,
    /// Time derivative order.
    #[arg(long)]
    pub i: Option<usize>,
    /// Derivative order of the g function.
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<f64>,
    #[arg(long)]
    pub b: Option<f64>,
    /// Finite-difference step.
    #[arg(long)]
    pub h: Option<f64>,
    /// Moment order for `oracle --kind moment`.
    #[arg(long)]
    pub p: Option<usize>,
    /// Laplace argument for `oracle --kind laplace`.
    #[arg(long)]
    pub lam: Option<f64>,
    #[arg(long, value_enum)]
    pub kind: Option<OracleKind>,
    #[arg(long)]
    pub paths: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub shards: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// Alias for `--method squares`.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub explicit_squares: Option<bool>,
    #[arg(long, value_enum)]
    pub clock: Option<Clock>,
    #[arg(long, value_enum)]
    pub smoothness: Option<SmoothnessRule>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x_grid: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub t_grid: Option<Vec<f64>>,
    /// CSV destination for per-row output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

macro_rules! merge_fields {
    ($primary:ident, $fallback:ident; $($field:ident),*) => {
        Opts { $($field: $primary.$field.or($fallback.$field)),* }
    };
}

impl Opts {
    /// Field-wise `self` or else `fallback`.
    pub fn merge(self, fallback: Opts) -> Opts {
        let primary = self;
        merge_fields!(primary, fallback;
            config, theta, kappa, sigma, delta, f, t, s, x, j, i, l, a, b, h, p, lam, kind,
            paths, seed, shards, method, explicit_squares, clock, smoothness, x_grid, t_grid, out)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw decomposed CIR (or BESQ with --delta) samples.
    Sample(Opts),
    /// Estimate u(t,x) = E f(X_t(x)).
    U(Opts),
    /// Estimate the mixed derivative d^j/dx^j d^i/dt^i u(t,x).
    Deriv(Opts),
    /// Evaluate the l-th x-derivative of the g function.
    Gfun(Opts),
    /// Print a closed-form or quadrature reference value.
    Oracle(Opts),
    /// Compare Monte-Carlo u against the oracles on a grid.
    OracleCompare(Opts),
    /// Kolmogorov equation residual on a (t,x) grid.
    VerifyPde(Opts),
    /// Polynomial growth of a derivative over an x grid.
    VerifyGrowth(Opts),
    /// Semigroup identity u(t+s,x) = E u(t, X_s(x)).
    VerifySemigroup(Opts),
    /// Moments of the affine mixture against the BESQ moments.
    MixAudit(Opts),
}

impl Command {
    fn split(self) -> (&'static str, Opts) {
        match self {
            Command::Sample(o) => ("sample", o),
            Command::U(o) => ("u", o),
            Command::Deriv(o) => ("deriv", o),
            Command::Gfun(o) => ("gfun", o),
            Command::Oracle(o) => ("oracle", o),
            Command::OracleCompare(o) => ("oracle-compare", o),
            Command::VerifyPde(o) => ("verify-pde", o),
            Command::VerifyGrowth(o) => ("verify-growth", o),
            Command::VerifySemigroup(o) => ("verify-semigroup", o),
            Command::MixAudit(o) => ("mix-audit", o),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "kolmocir", version, about = "CIR/BESQ sampling, derivative estimators and Kolmogorov checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Parser)]
#[command(name = "config")]
struct FileOpts {
    #[command(flatten)]
    opts: Opts,
}

/// A fully resolved run; serializing it and replaying reproduces the output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub command: String,
    pub theta: f64,
    pub kappa: f64,
    pub sigma: f64,
    pub delta: Option<f64>,
    pub f: String,
    pub t: f64,
    pub s: f64,
    pub x: f64,
    pub j: usize,
    pub i: usize,
    pub l: usize,
    pub a: f64,
    pub b: f64,
    pub h: f64,
    pub p: usize,
    pub lam: f64,
    pub kind: OracleKind,
    pub paths: u64,
    pub seed: u64,
    pub shards: u64,
    pub method: Method,
    pub clock: Clock,
    pub smoothness: SmoothnessRule,
    pub x_grid: Option<Vec<f64>>,
    pub t_grid: Option<Vec<f64>>,
    pub out: Option<PathBuf>,
}

fn enum_name<T: ValueEnum>(v: &T) -> String {
    v.to_possible_value().map(|p| p.get_name().to_string()).unwrap_or_default()
}

fn join(values: &[f64]) -> String {
    values.iter().map(f64::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    pub fn params(&self) -> Result<CirParams, Error> {
        CirParams::new(self.theta, self.kappa, self.sigma)
    }

    pub fn function(&self) -> Result<SmoothTestFn, Error> {
        self.f.parse()
    }

    pub fn estimator(&self) -> EstimatorConfig {
        EstimatorConfig {
            method: self.method,
            paths: self.paths,
            seed: self.seed,
            shards: self.shards,
            clock: self.clock,
            smoothness: self.smoothness,
        }
    }

    /// Config-file form: one `key=value` line per setting.
    pub fn to_kv(&self) -> String {
        let mut lines = vec![
            format!("theta={}", self.theta),
            format!("kappa={}", self.kappa),
            format!("sigma={}", self.sigma),
        ];
        if let Some(d) = self.delta {
            lines.push(format!("delta={d}"));
        }
        lines.extend([
            format!("f={}", self.f),
            format!("t={}", self.t),
            format!("s={}", self.s),
            format!("x={}", self.x),
            format!("j={}", self.j),
            format!("i={}", self.i),
            format!("l={}", self.l),
            format!("a={}", self.a),
            format!("b={}", self.b),
            format!("h={}", self.h),
            format!("p={}", self.p),
            format!("lam={}", self.lam),
            format!("kind={}", enum_name(&self.kind)),
            format!("paths={}", self.paths),
            format!("seed={}", self.seed),
            format!("shards={}", self.shards),
            format!("method={}", enum_name(&self.method)),
            format!("clock={}", enum_name(&self.clock)),
            format!("smoothness={}", enum_name(&self.smoothness)),
        ]);
        if let Some(g) = &self.x_grid {
            lines.push(format!("x-grid={}", join(g)));
        }
        if let Some(g) = &self.t_grid {
            lines.push(format!("t-grid={}", join(g)));
        }
        if let Some(out) = &self.out {
            lines.push(format!("out={}", out.display()));
        }
        lines.join("\n") + "\n"
    }
}

/// Error with its process exit code.
#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: 2, message: message.into() }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Self { code: 3, message: message.into() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::runtime(e.to_string())
    }
}

fn usage_err(e: Error) -> CliError {
    CliError::usage(e.to_string())
}

/// Turns `key=value` lines into `--key value` arguments.
fn file_args(text: &str) -> Result<Vec<String>, CliError> {
    let mut args = vec!["config".to_string()];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(CliError::usage(format!("config line {}: expected key=value, got '{line}'", n + 1)));
        };
        let key = key.trim().replace('_', "-");
        if key == "config" || key == "command" {
            continue;
        }
        args.push(format!("--{key}"));
        args.push(value.trim().to_string());
    }
    Ok(args)
}

fn seed_from_env() -> Result<Option<u64>, CliError> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::usage(format!("{SEED_ENV} must be an unsigned integer, got '{v}'"))),
        Err(_) => Ok(None),
    }
}

/// Parses arguments (including the program name) into a validated [`RunConfig`].
pub fn parse_config<I, S>(args: I) -> Result<RunConfig, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| {
        let code = if e.use_stderr() { 2 } else { 0 };
        CliError { code, message: e.to_string() }
    })?;
    let (command, opts) = cli.command.split();
    let opts = match &opts.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
            let file = FileOpts::try_parse_from(file_args(&text)?)
                .map_err(|e| CliError::usage(format!("config {}: {e}", path.display())))?;
            opts.merge(file.opts)
        }
        None => opts,
    };
    resolve(command, opts)
}

fn resolve(command: &str, o: Opts) -> Result<RunConfig, CliError> {
    let method = match (o.method, o.explicit_squares) {
        (Some(m), Some(true)) if m != Method::Squares => {
            return Err(CliError::usage(format!(
                "--explicit-squares contradicts --method {}",
                enum_name(&m)
            )))
        }
        (_, Some(true)) => Method::Squares,
        (m, _) => m.unwrap_or_default(),
    };
    let seed = match o.seed {
        Some(s) => s,
        None => seed_from_env()?.unwrap_or(DEFAULT_SEED),
    };
    let cfg = RunConfig {
        command: command.to_string(),
        theta: o.theta.unwrap_or(1.0),
        kappa: o.kappa.unwrap_or(1.0),
        sigma: o.sigma.unwrap_or(1.0),
        delta: o.delta,
        f: o.f.unwrap_or_else(|| "poly:0,1".into()),
        t: o.t.unwrap_or(0.5),
        s: o.s.unwrap_or(0.25),
        x: o.x.unwrap_or(1.0),
        j: o.j.unwrap_or(if command == "deriv" || command == "verify-growth" { 1 } else { 0 }),
        i: o.i.unwrap_or(0),
        l: o.l.unwrap_or(0),
        a: o.a.unwrap_or(0.5),
        b: o.b.unwrap_or(0.25),
        h: o.h.unwrap_or(1e-3),
        p: o.p.unwrap_or(1),
        lam: o.lam.unwrap_or(1.0),
        kind: o.kind.unwrap_or_default(),
        paths: o.paths.unwrap_or(100_000),
        seed,
        shards: o.shards.unwrap_or(EstimatorConfig::DEFAULT_SHARDS),
        method,
        clock: o.clock.unwrap_or_default(),
        smoothness: o.smoothness.unwrap_or_default(),
        x_grid: o.x_grid,
        t_grid: o.t_grid,
        out: o.out,
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &RunConfig) -> Result<(), CliError> {
    let params = cfg.params().map_err(usage_err)?;
    let f = cfg.function().map_err(usage_err)?;
    cfg.estimator().validate().map_err(usage_err)?;
    let nonneg = |name: &str, v: f64| {
        if v >= 0.0 && v.is_finite() {
            Ok(())
        } else {
            Err(CliError::usage(format!("--{name} must be finite and >= 0, got {v}")))
        }
    };
    nonneg("t", cfg.t)?;
    nonneg("s", cfg.s)?;
    nonneg("x", cfg.x)?;
    nonneg("b", cfg.b)?;
    nonneg("lam", cfg.lam)?;
    for g in [&cfg.x_grid, &cfg.t_grid].into_iter().flatten() {
        if g.is_empty() {
            return Err(CliError::usage("grids must not be empty"));
        }
        for &v in g {
            nonneg("grid", v)?;
        }
    }
    let delta = cfg.delta.unwrap_or(params.delta);
    if !(delta >= 1.0) {
        return Err(usage_err(Error::DimensionTooSmall(delta)));
    }
    match cfg.command.as_str() {
        "deriv" | "verify-growth" => {
            DerivRequest::new(cfg.j, cfg.i).check(f.q(), cfg.smoothness).map_err(usage_err)?;
        }
        "verify-pde" => {
            DerivRequest::new(0, 1).check(f.q(), cfg.smoothness).map_err(usage_err)?;
        }
        "gfun" => {
            if 2 * cfg.l + 1 > f.q() {
                return Err(usage_err(Error::OrderExceedsQ { order: 2 * cfg.l + 1, q: f.q() }));
            }
        }
        "mix-audit" => {
            let d = cfg.delta.unwrap_or(1.5);
            if is_integer(d) {
                return Err(usage_err(Error::AffineMixOnInteger(d)));
            }
        }
        _ => {}
    }
    if cfg.method == Method::Mix && is_integer(delta) && cfg.command != "mix-audit" {
        return Err(usage_err(Error::AffineMixOnInteger(delta)));
    }
    Ok(())
}

/// Output of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    /// Text for stdout (a single JSON line, or a bare number for `oracle`).
    pub stdout: String,
    pub pass: bool,
}

fn summary(cfg: &RunConfig, result: Value) -> String {
    json!({ "tool": "kolmocir", "version": VERSION, "config": cfg, "result": result }).to_string()
}

fn write_out(cfg: &RunConfig, write: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<(), CliError> {
    let Some(path) = &cfg.out else {
        return Ok(());
    };
    let file = File::create(path).map_err(|e| CliError::runtime(format!("cannot create {}: {e}", path.display())))?;
    let mut w = BufWriter::new(file);
    write(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

fn report_outcome(cfg: &RunConfig, report: VerifyReport) -> Result<Outcome, CliError> {
    write_out(cfg, |w| report.write_csv(w))?;
    let pass = report.all_pass();
    let value = serde_json::to_value(&report).map_err(|e| CliError::runtime(e.to_string()))?;
    Ok(Outcome { stdout: summary(cfg, value), pass })
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

fn run_sample(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let est = cfg.estimator();
    let (delta, tau, scale) = match cfg.delta {
        Some(d) => (d, cfg.t, 1.0),
        None => {
            let (tau, scale) = params.time_transform(cfg.t);
            (params.delta, tau, scale)
        }
    };
    let sampler = BesqSampler::new(delta, cfg.method)?;
    let shards = map_shards(&est, |shard, len| {
        (0..len)
            .map(|path| {
                let s = sampler.draw_unit(&mut RngStream::new(cfg.seed, shard, path)).at(tau, cfg.x);
                [s.xi, s.a, s.b, scale * s.value]
            })
            .collect::<Vec<_>>()
    });
    let rows: Vec<[f64; 4]> = shards.into_iter().flatten().collect();
    write_out(cfg, |w| {
        writeln!(w, "path,xi,a,b,value")?;
        for (k, r) in rows.iter().enumerate() {
            writeln!(w, "{k},{},{},{},{}", r[0], r[1], r[2], r[3])?;
        }
        Ok(())
    })?;
    let n = rows.len() as f64;
    let mean = rows.iter().map(|r| r[3]).sum::<f64>() / n;
    let var = rows.iter().map(|r| (r[3] - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let result = json!({
        "delta": delta, "tau": tau, "scale": scale,
        "samples": rows.len(), "mean": mean, "stderr": (var / n).sqrt(),
    });
    Ok(Outcome { stdout: summary(cfg, result), pass: true })
}

fn run_estimate(cfg: &RunConfig, j: usize, i: usize) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let f = cfg.function()?;
    let est = cfg.estimator();
    let req = DerivRequest::new(j, i);
    let one = |t: f64, x: f64| -> Result<(f64, f64, Option<f64>), CliError> {
        let e = if j == 0 && i == 0 {
            estimate_u(&f, &params, t, x, &est)?
        } else {
            estimate_mixed(&f, &params, t, x, req, &est)?
        };
        Ok((e.mean, e.stderr, deriv_exact(&f, &params, cfg.clock, t, x, j, i)))
    };
    if cfg.x_grid.is_none() && cfg.t_grid.is_none() {
        let (mean, stderr, oracle) = one(cfg.t, cfg.x)?;
        let mut result = json!({
            "mean": mean, "stderr": stderr, "paths": cfg.paths, "seed": cfg.seed, "shards": cfg.shards,
        });
        if let Some(o) = oracle {
            result["oracle"] = json!(o);
            result["abs_err"] = json!((mean - o).abs());
        }
        return Ok(Outcome { stdout: summary(cfg, result), pass: true });
    }
    let ts = cfg.t_grid.clone().unwrap_or_else(|| vec![cfg.t]);
    let xs = cfg.x_grid.clone().unwrap_or_else(|| vec![cfg.x]);
    let mut rows = Vec::new();
    for &t in &ts {
        for &x in &xs {
            let (mean, stderr, oracle) = one(t, x)?;
            rows.push((t, x, mean, stderr, oracle));
        }
    }
    write_out(cfg, |w| {
        writeln!(w, "t,x,j,i,mean,stderr,oracle,abs_err")?;
        for &(t, x, mean, stderr, oracle) in &rows {
            let err = oracle.map(|o| (mean - o).abs());
            writeln!(w, "{t},{x},{j},{i},{mean},{stderr},{},{}", opt_cell(oracle), opt_cell(err))?;
        }
        Ok(())
    })?;
    let json_rows: Vec<Value> = rows
        .iter()
        .map(|&(t, x, mean, stderr, oracle)| {
            json!({ "t": t, "x": x, "mean": mean, "stderr": stderr, "oracle": oracle,
                    "abs_err": oracle.map(|o| (mean - o).abs()) })
        })
        .collect();
    let result = json!({ "j": j, "i": i, "paths": cfg.paths, "seed": cfg.seed, "shards": cfg.shards, "rows": json_rows });
    Ok(Outcome { stdout: summary(cfg, result), pass: true })
}

fn run_gfun(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let f = cfg.function()?;
    let point = |x: f64| -> Result<(f64, Option<f64>, f64), CliError> {
        let args = GFunArgs::new(x, cfg.a, cfg.b)?;
        let value = g_deriv(&f, cfg.l, args)?;
        let limit = if x == 0.0 { Some(g_limit_at_zero(&f, cfg.l, cfg.a, cfg.b)?) } else { None };
        Ok((value, limit, g_growth_bound(&f, cfg.l, args)?))
    };
    let xs = cfg.x_grid.clone().unwrap_or_else(|| vec![cfg.x]);
    let rows = xs.iter().map(|&x| point(x).map(|p| (x, p))).collect::<Result<Vec<_>, _>>()?;
    write_out(cfg, |w| {
        writeln!(w, "x,value,limit,growth_bound")?;
        for (x, (v, lim, g)) in &rows {
            writeln!(w, "{x},{v},{},{g}", opt_cell(*lim))?;
        }
        Ok(())
    })?;
    let result = if cfg.x_grid.is_none() {
        let (_, (value, limit, growth_bound)) = rows[0];
        json!({ "value": value, "limit": limit, "growth_bound": growth_bound })
    } else {
        let json_rows: Vec<Value> = rows
            .iter()
            .map(|(x, (v, lim, g))| json!({ "x": x, "value": v, "limit": lim, "growth_bound": g }))
            .collect();
        json!({ "rows": json_rows })
    };
    Ok(Outcome { stdout: summary(cfg, result), pass: true })
}

fn run_oracle(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let value = match (cfg.kind, cfg.clock) {
        (OracleKind::Moment, Clock::Cir) => cir_moment(&params, cfg.t, cfg.x, cfg.p),
        (OracleKind::Moment, Clock::Besq) => besq_moment(params.delta, cfg.t, cfg.x, cfg.p),
        (OracleKind::Laplace, Clock::Cir) => cir_laplace(&params, cfg.t, cfg.x, cfg.lam),
        (OracleKind::Laplace, Clock::Besq) => besq_laplace(params.delta, cfg.t, cfg.x, cfg.lam),
        (OracleKind::Density, clock) => {
            let f = cfg.function()?;
            let q = QuadConfig::default();
            match clock {
                Clock::Cir => density_u(|y| f.eval(y), &params, cfg.t, cfg.x, &q)?,
                Clock::Besq => besq_expectation(params.delta, cfg.t, cfg.x, &q, |y| f.eval(y))?,
            }
        }
    };
    Ok(Outcome { stdout: value.to_string(), pass: true })
}

fn run_oracle_compare(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = cfg.params()?;
    let f = cfg.function()?;
    let est = cfg.estimator();
    let std_grid = Grid::standard();
    let ts = cfg.t_grid.clone().unwrap_or(std_grid.ts);
    let xs = cfg.x_grid.clone().unwrap_or(std_grid.xs);
    let q = QuadConfig::default();
    let mut rows = Vec::new();
    let mut oracle_gap: f64 = 0.0;
    for &t in &ts {
        for &x in &xs {
            let mc = estimate_u(&f, &params, t, x, &est)?;
            let density = if t > 0.0 {
                match cfg.clock {
                    Clock::Cir => density_u(|y| f.eval(y), &params, t, x, &q)?,
                    Clock::Besq => besq_expectation(params.delta, t, x, &q, |y| f.eval(y))?,
                }
            } else {
                f.eval(x)
            };
            let closed = deriv_exact(&f, &params, cfg.clock, t, x, 0, 0);
            if let Some(c) = closed {
                oracle_gap = oracle_gap.max((c - density).abs());
            }
            let reference = closed.unwrap_or(density);
            let err = mc.mean - reference;
            rows.push(vec![t, x, mc.mean, mc.stderr, reference, density, err.abs(), z_stat(err, mc.stderr)]);
        }
    }
    let mut report = VerifyReport::new(
        "oracle-compare",
        Grid { ts, xs }.describe(),
        1.0,
        &["t", "x", "mc_mean", "mc_stderr", "oracle", "density", "abs_err", "stat"],
        rows,
        7,
    );
    report.extras.insert("max_closed_form_density_gap".into(), oracle_gap);
    report_outcome(cfg, report)
}

/// Executes a validated configuration.
pub fn run(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let params = || cfg.params().map_err(CliError::from);
    let est = cfg.estimator();
    match cfg.command.as_str() {
        "sample" => run_sample(cfg),
        "u" => run_estimate(cfg, 0, 0),
        "deriv" => run_estimate(cfg, cfg.j, cfg.i),
        "gfun" => run_gfun(cfg),
        "oracle" => run_oracle(cfg),
        "oracle-compare" => run_oracle_compare(cfg),
        "verify-pde" => {
            let std_grid = Grid::standard();
            let grid = Grid {
                ts: cfg.t_grid.clone().unwrap_or(std_grid.ts),
                xs: cfg.x_grid.clone().unwrap_or(std_grid.xs),
            };
            report_outcome(cfg, verify_pde(&cfg.function()?, &params()?, &grid, &est)?)
        }
        "verify-growth" => {
            let xs = cfg
                .x_grid
                .clone()
                .unwrap_or_else(|| vec![0.0, 0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0, 50.0]);
            let req = DerivRequest::new(cfg.j, cfg.i);
            report_outcome(cfg, verify_growth(&cfg.function()?, &params()?, req, cfg.t, &xs, &est)?)
        }
        "verify-semigroup" => {
            let xs = cfg.x_grid.clone().unwrap_or_else(|| Grid::standard().xs);
            report_outcome(cfg, verify_semigroup(&cfg.function()?, &params()?, cfg.t, cfg.s, &xs, &est)?)
        }
        "mix-audit" => {
            report_outcome(cfg, mixture_audit(cfg.delta.unwrap_or(1.5), cfg.t, cfg.x, &est)?)
        }
        other => Err(CliError::usage(format!("unknown command {other}"))),
    }
}

/// Full entry point; returns the process exit code.
pub fn main_with_args<I, S>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let result = parse_config(args).and_then(|cfg| run(&cfg));
    match result {
        Ok(outcome) => {
            if writeln!(stdout, "{}", outcome.stdout).is_err() {
                return 3;
            }
            if outcome.pass {
                0
            } else {
                1
            }
        }
        Err(e) if e.code == 0 => {
            let _ = write!(stdout, "{}", e.message);
            0
        }
        Err(e) => {
            let _ = writeln!(stderr, "error: {}", e.message.trim_end());
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(args: &[&str]) -> Result<RunConfig, CliError> {
        parse_config(std::iter::once("kolmocir").chain(args.iter().copied()))
    }

    #[test]
    fn well_formed_deriv_request() {
        let cfg = parse(&[
            "deriv", "--theta", "1", "--kappa", "1", "--sigma", "1", "--x", "1", "--t", "0.5", "--j", "1",
            "--f", "poly:0,1", "--paths", "100000", "--seed", "7",
        ])
        .unwrap();
        assert_eq!((cfg.j, cfg.paths, cfg.seed), (1, 100_000, 7));
        assert!(parse(&["deriv", "--j", "3", "--f", "poly:0,1", "--seed", "1"]).is_ok());
    }

    #[test]
    fn feller_violation_is_a_usage_error() {
        let e = parse(&["u", "--sigma", "3", "--theta", "1", "--kappa", "1"]).unwrap_err();
        assert_eq!(e.code, 2);
        assert!(e.message.contains("sigma^2 <= 4*theta*kappa"), "{}", e.message);
    }

    #[test]
    fn contradictions_are_rejected() {
        let e = parse(&["sample", "--method", "gamma", "--explicit-squares", "--seed", "1"]).unwrap_err();
        assert_eq!(e.code, 2);
        let cfg = parse(&["sample", "--explicit-squares", "--seed", "1"]).unwrap();
        assert_eq!(cfg.method, Method::Squares);
        assert_eq!(parse(&["mix-audit", "--delta", "2", "--seed", "1"]).unwrap_err().code, 2);
        assert_eq!(parse(&["deriv", "--j", "17", "--seed", "1"]).unwrap_err().code, 2);
        assert_eq!(parse(&["u", "--paths", "1", "--seed", "1"]).unwrap_err().code, 2);
    }

    #[test]
    fn kv_round_trip() {
        let cfg = parse(&["deriv", "--j", "2", "--x-grid", "0,1.5", "--clock", "besq", "--seed", "5"]).unwrap();
        let args = file_args(&cfg.to_kv()).unwrap();
        let file = FileOpts::try_parse_from(args).unwrap();
        let again = resolve("deriv", file.opts).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn file_lines_are_validated() {
        assert_eq!(file_args("theta 1").unwrap_err().code, 2);
        assert_eq!(file_args("# c\n\nx_grid = 1,2\n").unwrap(), vec!["config", "--x-grid", "1,2"]);
    }
}
