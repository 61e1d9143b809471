use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_kirchhoff");

const ADMISSIBLE: &str = r#"
[domain]
kind = "interval"
length = "pi"
modes = 12

[coefficients.sigma]
family = "power-affine"
sigma0 = 1.0
sigma1 = 1.0
beta = 1.0

[coefficients.phi]
family = "power-affine"
phi0 = 1.0
phi1 = 1.0
alpha = 1.0

[coefficients.f]
family = "cubic-minus-linear"
a = 1.0
b = 1.0

[stepper]
dt = 0.02

[run]
horizon = 2.0
stride = 5

[initial]
u = [0.8, 0.3]
v = [0.1]
"#;

const NOT_DISSIPATIVE: &str = r#"
[domain]
kind = "interval"
length = "pi"
modes = 8

[coefficients.sigma]
family = "constant"
sigma0 = 1.0

[coefficients.phi]
family = "constant"
phi0 = 1.0

[coefficients.f]
family = "linear"
mu = -5.0
"#;

struct Case {
    dir: TempDir,
}

impl Case {
    fn new(config: &str) -> Case {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("run.toml"), config).unwrap();
        Case { dir }
    }

    fn config(&self) -> PathBuf {
        self.dir.path().join("run.toml")
    }

    fn out(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn run(&self, args: &[&str], out: &str) -> Output {
        let mut cmd = Command::new(BIN);
        cmd.args(args)
            .arg(self.config())
            .arg("--out")
            .arg(self.out(out));
        cmd.env_remove("KIRCHHOFF_OUTPUT_DIR");
        cmd.output().unwrap()
    }
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap_or(-1)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn config_hash(case: &Case) -> String {
    use sha2::{Digest, Sha256};
    format!("{:x}", Sha256::digest(fs::read(case.config()).unwrap()))
}

/// Last data row of a CSV written by the tool, as numbers.
fn last_row(path: &Path) -> Vec<f64> {
    let text = fs::read_to_string(path).unwrap();
    let line = text.lines().filter(|l| !l.starts_with('#')).last().unwrap();
    line.split(',').map(|x| x.parse().unwrap()).collect()
}

#[test]
fn check_passes_on_the_admissible_set() {
    let case = Case::new(ADMISSIBLE);
    let o = case.run(&["check"], "check");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&case.out("check").join("assumptions.json"));
    assert_eq!(report["config_sha256"], config_hash(&case));
}

#[test]
fn check_and_gated_probes_refuse_a_non_dissipative_set() {
    let case = Case::new(NOT_DISSIPATIVE);
    assert_eq!(code(&case.run(&["check"], "check")), 2);
    let o = case.run(&["probe", "absorbing"], "probe");
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("refused"));
}

#[test]
fn malformed_configs_exit_with_key_diagnostics() {
    let case = Case::new(&ADMISSIBLE.replace("dt = 0.02", "dtt = 0.02"));
    let o = case.run(&["simulate"], "sim");
    assert_eq!(code(&o), 4);
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("dtt") && err.contains("line"), "{err}");

    let case = Case::new(&ADMISSIBLE.replace("modes = 12", "modes = \"twelve\""));
    assert_eq!(code(&case.run(&["check"], "c")), 4);

    let case = Case::new(&ADMISSIBLE.replace("sigma0 = 1.0", "sigma0 = -1.0"));
    assert_eq!(code(&case.run(&["check"], "c")), 4);

    let o = Command::new(BIN)
        .args(["check", "/nonexistent/run.toml"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 4);
}

#[test]
fn newton_failure_exits_with_numerical_failure() {
    let cfg = ADMISSIBLE.replace(
        "dt = 0.02",
        "dt = 0.5\nnewton_max_iters = 1\nretry_budget = 0",
    );
    let case = Case::new(&cfg.replace("u = [0.8, 0.3]", "u = [2.0, 1.0]"));
    assert_eq!(code(&case.run(&["simulate"], "sim")), 3);
}

#[test]
fn simulate_is_byte_identical_and_hashed() {
    let case = Case::new(ADMISSIBLE);
    assert_eq!(code(&case.run(&["simulate"], "a")), 0);
    assert_eq!(code(&case.run(&["simulate"], "b")), 0);
    let hash = config_hash(&case);
    let names = [
        "trajectory.csv",
        "ledger.csv",
        "summary.json",
        "energy.svg",
        "residual.svg",
    ];
    for name in names {
        let a = fs::read(case.out("a").join(name)).unwrap();
        let b = fs::read(case.out("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
        assert!(String::from_utf8_lossy(&a).contains(&hash), "{name}");
    }
    let summary = json(&case.out("a").join("summary.json"));
    assert!(summary.get("wall_time_seconds").is_none());
    assert!(summary["max_abs_residual"].as_f64().unwrap() < 1e-3);
}

#[test]
fn wall_time_is_opt_in() {
    let case = Case::new(&ADMISSIBLE.replace("stride = 5", "stride = 5\nrecord_wall_time = true"));
    assert_eq!(code(&case.run(&["simulate"], "a")), 0);
    let summary = json(&case.out("a").join("summary.json"));
    assert!(summary["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn environment_sets_the_default_output_directory() {
    let case = Case::new(ADMISSIBLE);
    let target = case.out("from-env");
    let o = Command::new(BIN)
        .arg("check")
        .arg(case.config())
        .env("KIRCHHOFF_OUTPUT_DIR", &target)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    assert!(target.join("assumptions.json").exists());
}

#[test]
fn halving_dt_twice_gives_second_order_ledgers() {
    let case = Case::new(&ADMISSIBLE.replace("horizon = 2.0", "horizon = 5.0"));
    let o = case.run(
        &[
            "sweep",
            "--param",
            "stepper.dt",
            "--values",
            "0.01,0.005,0.0025",
        ],
        "sweep",
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dts = [0.01f64, 0.005, 0.0025];
    let residuals: Vec<f64> = (0..3)
        .map(|i| {
            let ledger = case
                .out("sweep")
                .join(format!("run-{i:03}"))
                .join("ledger.csv");
            last_row(&ledger)[5].abs()
        })
        .collect();
    let lx: Vec<f64> = dts.iter().map(|d| d.ln()).collect();
    let ly: Vec<f64> = residuals.iter().map(|r| r.ln()).collect();
    let (mx, my) = (lx.iter().sum::<f64>() / 3.0, ly.iter().sum::<f64>() / 3.0);
    let slope = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / lx.iter().map(|x| (x - mx).powi(2)).sum::<f64>();
    assert!(slope >= 1.9, "slope {slope}, residuals {residuals:?}");
    let aggregate = fs::read_to_string(case.out("sweep").join("aggregate.csv")).unwrap();
    assert!(aggregate.contains(&config_hash(&case)));
    assert_eq!(aggregate.lines().filter(|l| !l.starts_with('#')).count(), 4);
}

#[test]
fn determining_probe_reports_epsilon_l() {
    let cfg = format!(
        "{}\n[probe.determining]\nn_low = 3\npairs = 2\n",
        ADMISSIBLE.replace("modes = 12", "modes = 8")
    );
    let case = Case::new(&cfg);
    let o = case.run(&["probe", "determining"], "det");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(&case.out("det").join("determining.json"));
    assert_eq!(report["constants"]["epsilon_L"].as_f64().unwrap(), 0.25);
    assert_eq!(report["config_sha256"], config_hash(&case));
    assert_eq!(report["series_file"], "determining_series.csv");
    let series = fs::read_to_string(case.out("det").join("determining_series.csv")).unwrap();
    assert!(series.starts_with(&format!("# config_sha256={}", config_hash(&case))));
}

#[test]
fn equilibria_library_is_closed_under_negation() {
    let case = Case::new(ADMISSIBLE);
    assert_eq!(code(&case.run(&["equilibria"], "eq")), 0);
    let lib = json(&case.out("eq").join("equilibria.json"));
    assert_eq!(lib["metadata"]["config_sha256"], config_hash(&case));
    let entries = lib["equilibria"].as_array().unwrap();
    assert!(entries.len() >= 3, "{}", entries.len());
}

#[test]
fn oracle_compare_reports_both_estimates() {
    let case = Case::new(&ADMISSIBLE.replace("horizon = 2.0", "horizon = 0.5"));
    let o = case.run(&["oracle-compare"], "oracle");
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let gap = json(&case.out("oracle").join("oracle.json"));
    for key in ["gap", "spectral_estimate", "fd_estimate"] {
        assert!(gap[key].as_f64().unwrap() >= 0.0, "{key}");
    }
    assert_eq!(gap["within_tolerance"], true);
}
