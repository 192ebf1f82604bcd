use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn kolmocir(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kolmocir")).args(args).env_remove("KOLMOCIR_SEED").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn summary(o: &Output) -> Value {
    serde_json::from_str(stdout(o).trim()).unwrap()
}

/// Writes the embedded configuration of a summary as a key=value file.
fn config_file(summary: &Value, path: &Path) {
    let mut text = String::new();
    for (key, value) in summary["config"].as_object().unwrap() {
        let rendered = match value {
            Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Array(items) => items.iter().map(Value::to_string).collect::<Vec<_>>().join(","),
            other => other.to_string(),
        };
        text.push_str(&format!("{key}={rendered}\n"));
    }
    std::fs::write(path, text).unwrap();
}

#[test]
fn exit_codes_follow_the_contract() {
    let ok = kolmocir(&["verify-pde", "--f", "poly:0,1", "--paths", "20000", "--seed", "1"]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert_eq!(summary(&ok)["result"]["pass"], Value::Bool(true));

    let audit = kolmocir(&["mix-audit", "--delta", "1.5", "--x", "1", "--t", "1", "--paths", "50000", "--seed", "1"]);
    assert_eq!(audit.status.code(), Some(1));
    assert_eq!(summary(&audit)["result"]["check"], "mixture");

    let usage = kolmocir(&["u", "--sigma", "3", "--theta", "1", "--kappa", "1"]);
    assert_eq!(usage.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&usage.stderr).contains("sigma^2 <= 4*theta*kappa"));
    assert!(usage.stdout.is_empty());

    assert_eq!(kolmocir(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(kolmocir(&["u", "--paths", "1"]).status.code(), Some(2));

    let runtime = kolmocir(&["deriv", "--i", "1", "--t", "0"]);
    assert_eq!(runtime.status.code(), Some(3));
    assert_eq!(kolmocir(&["oracle", "--kind", "density", "--t", "0"]).status.code(), Some(3));

    assert_eq!(kolmocir(&["--help"]).status.code(), Some(0));
}

#[test]
fn initial_time_is_exact() {
    let o = kolmocir(&["u", "--t", "0", "--x", "2", "--f", "poly:1,1"]);
    let s = summary(&o);
    assert_eq!(s["result"]["mean"], 3.0);
    assert_eq!(s["result"]["stderr"], 0.0);
    assert_eq!(s["tool"], "kolmocir");
    assert_eq!(s["version"], kolmocir::cli::VERSION);
}

#[test]
fn oracle_prints_a_bare_number() {
    let o = kolmocir(&["oracle", "--kind", "moment", "--p", "1", "--theta", "1", "--kappa", "2", "--x", "0", "--t", "1"]);
    let v: f64 = stdout(&o).trim().parse().unwrap();
    assert!((v - 2.0 * (1.0 - (-1f64).exp())).abs() < 1e-15);
    let o = kolmocir(&["oracle", "--kind", "density", "--f", "exp_neg:1", "--t", "0.5"]);
    let density: f64 = stdout(&o).trim().parse().unwrap();
    let o = kolmocir(&["oracle", "--kind", "laplace", "--lam", "1", "--t", "0.5"]);
    let laplace: f64 = stdout(&o).trim().parse().unwrap();
    assert!((density - laplace).abs() < 1e-8);
}

#[test]
fn replaying_the_embedded_config_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 4] = [
        &["deriv", "--f", "exp_neg:1", "--j", "2", "--x-grid", "0,1,2.5", "--paths", "5000", "--seed", "17"],
        &["verify-growth", "--f", "sin:1", "--j", "1", "--paths", "2000", "--clock", "besq", "--seed", "17"],
        &["sample", "--delta", "1.7", "--method", "mix", "--paths", "20", "--seed", "17"],
        &["oracle-compare", "--f", "poly:0,0,1", "--paths", "5000", "--seed", "17"],
    ];
    for args in runs {
        let first = kolmocir(args);
        assert_eq!(first.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&first.stderr));
        let path = dir.path().join(format!("{}.cfg", args[0]));
        config_file(&summary(&first), &path);
        let replay = kolmocir(&[args[0], "--config", path.to_str().unwrap()]);
        assert_eq!(stdout(&first), stdout(&replay), "{args:?}");
    }
}

#[test]
fn flags_override_the_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("run.cfg");
    std::fs::write(&path, "# defaults\ntheta=2\nx=4\nseed=5\npaths=100\n").unwrap();
    let s = summary(&kolmocir(&["u", "--config", path.to_str().unwrap(), "--x", "0.5"]));
    assert_eq!(s["config"]["theta"], 2.0);
    assert_eq!(s["config"]["x"], 0.5);
    assert_eq!(s["config"]["seed"], 5);

    std::fs::write(&path, "theta\n").unwrap();
    assert_eq!(kolmocir(&["u", "--config", path.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn seed_comes_from_flag_then_environment_then_default() {
    let run = |env: Option<&str>, extra: &[&str]| {
        let mut cmd = Command::new(env!("CARGO_BIN_EXE_kolmocir"));
        cmd.args(["u", "--paths", "100"]).args(extra).env_remove("KOLMOCIR_SEED");
        if let Some(v) = env {
            cmd.env("KOLMOCIR_SEED", v);
        }
        cmd.output().unwrap()
    };
    assert_eq!(summary(&run(None, &[]))["config"]["seed"], 42);
    assert_eq!(summary(&run(Some("99"), &[]))["config"]["seed"], 99);
    assert_eq!(summary(&run(Some("99"), &["--seed", "7"]))["config"]["seed"], 7);
    assert_eq!(run(Some("abc"), &[]).status.code(), Some(2));
}

#[test]
fn csv_outputs_have_fixed_headers() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [(&[&str], &str, usize); 5] = [
        (&["deriv", "--j", "1", "--x-grid", "0,1", "--t-grid", "0.5,1", "--paths", "1000"], "t,x,j,i,mean,stderr,oracle,abs_err", 4),
        (&["sample", "--delta", "2.5", "--paths", "7"], "path,xi,a,b,value", 7),
        (&["gfun", "--f", "exp_neg:1", "--l", "1", "--x-grid", "0,0.5,1"], "x,value,limit,growth_bound", 3),
        (&["verify-pde", "--f", "poly:0,1", "--paths", "2000"], "t,x,residual,stderr,stat,dt,dx1,dx2", 15),
        (&["mix-audit", "--delta", "1.5", "--paths", "2000"], "moment,truth,empirical,gap,stderr,ci_lo,ci_hi,stat", 4),
    ];
    for (args, header, rows) in cases {
        let path = dir.path().join(format!("{}.csv", args[0]));
        let mut full: Vec<&str> = args.to_vec();
        let p = path.to_str().unwrap().to_string();
        full.extend(["--out", &p]);
        let o = kolmocir(&full);
        assert!(o.status.code().unwrap() <= 1, "{args:?}: {}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(header), "{}", args[0]);
        assert_eq!(lines.count(), rows, "{}", args[0]);
    }
}

#[test]
fn in_process_entry_point_matches_the_binary() {
    let args = ["kolmocir", "deriv", "--f", "sin:1", "--j", "1", "--paths", "3000", "--seed", "4"];
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = kolmocir::cli::main_with_args(args, &mut out, &mut err);
    assert_eq!(code, 0);
    assert_eq!(String::from_utf8(out).unwrap(), stdout(&kolmocir(&args[1..])));
}
