//! End-to-end runs of the `ddeperiodic` binary: exit codes, report
//! contents, CSV output, determinism and schema conformance.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const FAST_SAMPLING: &str = "[sampling]\nboundary = 256\ndirections = 4\nsup_samples = 4000\n";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddeperiodic"))
}

struct Run {
    output: Output,
    out: PathBuf,
    _dir: TempDir,
}

impl Run {
    fn code(&self) -> i32 {
        self.output.status.code().expect("exit code")
    }

    fn stdout(&self) -> String {
        String::from_utf8_lossy(&self.output.stdout).into_owned()
    }

    fn stderr(&self) -> String {
        String::from_utf8_lossy(&self.output.stderr).into_owned()
    }

    fn report_text(&self) -> String {
        std::fs::read_to_string(self.out.join("report.json")).expect("report.json")
    }

    fn report(&self) -> Value {
        let report: Value = serde_json::from_str(&self.report_text()).unwrap();
        validate(&report);
        report
    }
}

fn run(command: &str, config: Option<&str>, extra: &[&str]) -> Run {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let mut cmd = bin();
    cmd.arg(command).arg("--out").arg(&out);
    if let Some(text) = config {
        let path = dir.path().join("run.toml");
        std::fs::write(&path, text).unwrap();
        cmd.arg("--config").arg(&path);
    }
    cmd.args(extra);
    let output = cmd.output().unwrap();
    Run { output, out, _dir: dir }
}

fn validate(report: &Value) {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/report.schema.json");
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).expect("valid schema");
    let errors: Vec<String> = validator.iter_errors(report).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "schema violations: {errors:#?}");
}

fn scalar(a: f64, b: f64, tau: f64, period: f64, rest: &str) -> String {
    // top-level keys in `rest` must precede its tables
    format!("tau = {tau}\nperiod = {period}\n{rest}\n[system]\nkind = \"linear\"\na = [[{a:?}]]\nb = [[{b:?}]]\n")
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;
const HALF_PI: f64 = std::f64::consts::FRAC_PI_2;

#[test]
fn analyze_certifies_scalar_decay() {
    let r = run("analyze", Some(&scalar(-1.0, 0.0, 0.0, TWO_PI, "chi = 1\n")), &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let rep = r.report();
    assert_eq!(rep["status"], "pass");
    assert_eq!(rep["certificate"]["nonresonant"], true);
    assert_eq!(rep["certificate"]["gamma"], 1);
    // lambda_1 = 1 does not exceed |A| + |B| = 1, so harmonic 1 is still checked
    assert_eq!(rep["certificate"]["k0"], 1);
}

#[test]
fn analyze_flags_resonance_without_a_bound() {
    let r = run("analyze", Some(&scalar(0.0, -1.0, HALF_PI, TWO_PI, "chi = 1\n")), &[]);
    assert_eq!(r.code(), 2);
    let rep = r.report();
    assert_eq!(rep["status"], "certificate_failed");
    assert_eq!(rep["certificate"]["failing_k"], 1);
    assert!(rep["certificate"]["gamma"].is_null());
    assert!(rep["certificate"]["h_values"][1].as_f64().unwrap().abs() < 1e-12);
}

#[test]
fn analyze_reports_the_period_scan() {
    let cfg = scalar(-1.0, 0.5, 0.3, 2.0, "chi = 1\n[scan]\nt_lo = 0.5\nt_hi = 5.0\nsteps = 10\n");
    let r = run("analyze", Some(&cfg), &[]);
    assert_eq!(r.code(), 0);
    assert_eq!(r.report()["certificate"]["scan"].as_array().unwrap().len(), 10);
}

#[test]
fn solve_matches_the_harmonic_balance() {
    let cfg = scalar(
        -1.0,
        0.0,
        0.0,
        TWO_PI,
        "[domain]\nradius = 2.0\n[forcing]\ncos = [[1.0]]\n[solver]\nbudget = 8\n",
    );
    let r = run("solve", Some(&cfg), &[]);
    assert_eq!(r.code(), 0, "{}\n{}", r.stdout(), r.stderr());
    let rep = r.report();
    assert_eq!(rep["solutions"]["count"], 1);
    let rec = &rep["solutions"]["records"][0];
    // u = (cos t + sin t) / 2, coefficients [a0, a1, b1, ...]
    let c: Vec<f64> = rec["coefficients"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    assert!(c[0].abs() < 1e-12 && (c[1] - 0.5).abs() < 1e-10 && (c[2] - 0.5).abs() < 1e-10);
    assert_eq!(rep["degree_audit"]["passes"], true);

    let csv = std::fs::read_to_string(r.out.join("solution_0.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,u1"));
    for line in lines {
        let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
        let exact = 0.5 * (v[0].cos() + v[0].sin());
        assert!((v[1] - exact).abs() < 1e-10);
    }
}

#[test]
fn solve_without_forcing_finds_only_the_equilibrium() {
    let cfg = scalar(
        -1.0,
        0.3,
        0.5,
        2.0,
        "[domain]\nradius = 2.0\n[forcing]\namplitude = 0.0\ncos = [[1.0]]\n[solver]\nbudget = 8\n",
    );
    let r = run("solve", Some(&cfg), &[]);
    assert_eq!(r.code(), 0);
    let rep = r.report();
    assert_eq!(rep["solutions"]["count"], 1);
    let c = rep["solutions"]["records"][0]["coefficients"].as_array().unwrap();
    assert!(c.iter().all(|v| v.as_f64().unwrap().abs() < 1e-12));
}

#[test]
fn solve_refuses_resonant_systems_unless_forced() {
    let cfg = scalar(0.0, -1.0, HALF_PI, TWO_PI, "[domain]\nradius = 2.0\n[forcing]\ncos = [[1.0]]\n");
    let r = run("solve", Some(&cfg), &[]);
    assert_eq!(r.code(), 2);
    let rep = r.report();
    assert_eq!(rep["status"], "refused");
    assert!(rep.get("solutions").is_none());
    assert!(!r.out.join("solution_0.csv").exists());

    let forced = run("solve", Some(&cfg), &["--force"]);
    assert_eq!(forced.code(), 2);
    let rep = forced.report();
    assert_eq!(rep["status"], "certificate_failed");
    assert!(rep.get("solutions").is_some());
}

#[test]
fn floquet_classifies_decay_and_growth() {
    let decay = "tau = 0.1\nperiod = 1.0\nchi = 1\n[system]\nkind = \"linear\"\na = [[-1.0, 0.0], [0.0, -1.0]]\nb = [[0.0, 0.0], [0.0, 0.0]]\n[integrator]\nm = 16\n";
    let r = run("floquet", Some(decay), &[]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let f = &r.report()["floquet"];
    assert_eq!(f["report"]["index"], 1);
    assert_eq!(f["report"]["stable_hint"], true);
    assert_eq!(f["index_agreement"], true);
    assert!(f["characteristic"]["positive_root"].is_null());

    let r = run("floquet", Some(&scalar(1.0, 0.0, 0.0, 1.0, "")), &[]);
    assert_eq!(r.code(), 0);
    let f = &r.report()["floquet"];
    assert_eq!(f["report"]["index"], -1);
    assert_eq!(f["report"]["stable_hint"], false);
    assert_eq!(f["ode_degree"]["consistent"], true);
    assert!((f["characteristic"]["positive_root"].as_f64().unwrap() - 1.0).abs() < 1e-10);
}

#[test]
fn floquet_reports_a_multiplier_on_one() {
    let r = run("floquet", Some(&scalar(0.0, -1.0, HALF_PI, TWO_PI, "")), &[]);
    assert_eq!(r.code(), 2);
    let rep = r.report();
    assert!(rep["floquet"]["report"].is_null());
    assert!(rep["messages"][0].as_str().unwrap().contains("resonant"));
}

#[test]
fn verify_domain_accepts_restoring_and_rejects_repelling_fields() {
    let rest = format!("[domain]\nradius = 1.0\n{FAST_SAMPLING}");
    let r = run("verify-domain", Some(&scalar(-1.0, 0.0, 0.1, 1.0, &rest)), &[]);
    assert_eq!(r.code(), 0);
    let d = &r.report()["domain_verification"];
    assert_eq!(d["inward"]["weak_pass"], true);
    assert_eq!(d["tau_admissible"], true);

    let r = run("verify-domain", Some(&scalar(1.0, 0.0, 0.1, 1.0, &rest)), &[]);
    assert_eq!(r.code(), 2);
    let d = &r.report()["domain_verification"];
    assert_eq!(d["inward"]["weak_pass"], false);
    assert!(d["tau_star"].is_null());
}

fn example_config(holes: usize, amplitude: f64) -> String {
    format!(
        "tau = 1e-4\nperiod = 1.0\n[system]\nkind = \"example\"\nholes = {holes}\n[domain]\nradius = 4.0\neta = 0.1\n\
         [forcing]\namplitude = {amplitude:?}\ncos = [[1.0, 0.0]]\nsin = [[0.0, 1.0]]\n[solver]\nbudget = 32\n{FAST_SAMPLING}"
    )
}

#[test]
fn example_headline_counts_against_j_plus_one() {
    for (holes, expected) in [(1, 2), (2, 3)] {
        let r = run("example", Some(&example_config(holes, 1e-3)), &[]);
        assert_eq!(r.code(), 0, "{}\n{}", r.stdout(), r.stderr());
        let rep = r.report();
        let headline = rep["headline"].as_str().unwrap();
        assert!(headline.ends_with(&format!("of expected \u{393} = J+1 = {expected}")), "{headline}");
        assert!(r.stdout().contains(headline));
        assert!(rep["solutions"]["count"].as_u64().unwrap() >= expected);
        assert_eq!(rep["certificate"]["gamma"], expected);
        assert_eq!(rep["forcing_regime"]["small_forcing"], true);
        assert_eq!(rep["domain_verification"]["inward"]["strong_pass"], true);
    }
}

#[test]
fn example_flags_large_forcing() {
    let r = run("example", Some(&example_config(2, 2.0)), &[]);
    assert_eq!(r.code(), 2);
    let rep = r.report();
    assert_eq!(rep["forcing_regime"]["small_forcing"], false);
    assert_eq!(rep["forcing_regime"]["note"], "outside small-forcing regime");
}

#[test]
fn example_runs_without_a_config() {
    let r = run("example", None, &["--seed", "5", "--threads", "1"]);
    assert_eq!(r.code(), 0, "{}", r.stderr());
    let rep = r.report();
    assert_eq!(rep["provenance"]["seed"], 5);
    assert_eq!(rep["provenance"]["config"]["seed"], 5);
    assert_eq!(rep["provenance"]["threads"], 1);
}

#[test]
fn identical_runs_write_identical_files() {
    let cfg = example_config(2, 1e-3);
    let (a, b) = (run("example", Some(&cfg), &["--seed", "11"]), run("example", Some(&cfg), &["--seed", "11"]));
    assert_eq!(a.code(), 0);
    assert_eq!(a.report_text(), b.report_text());
    let count = a.report()["solutions"]["count"].as_u64().unwrap();
    for i in 0..count {
        let name = format!("solution_{i}.csv");
        assert_eq!(
            std::fs::read(a.out.join(&name)).unwrap(),
            std::fs::read(b.out.join(&name)).unwrap()
        );
    }
}

#[test]
fn embedded_config_reproduces_the_report() {
    let cfg = scalar(-1.0, 0.4, 0.5, 2.0, "[domain]\nradius = 2.0\n[forcing]\ncos = [[0.3]]\nsin = [[0.0], [0.2]]\n");
    let first = run("solve", Some(&cfg), &["--seed", "3"]);
    assert_eq!(first.code(), 0);
    let echoed = &first.report()["provenance"]["config"];
    // re-run from the echoed configuration
    let toml_text = toml::to_string(&strip_nulls(echoed.clone())).unwrap();
    let second = run("solve", Some(&toml_text), &[]);
    assert_eq!(first.report_text(), second.report_text());
}

fn strip_nulls(v: Value) -> Value {
    match v {
        Value::Object(map) => Value::Object(
            map.into_iter()
                .filter(|(_, v)| !v.is_null())
                .map(|(k, v)| (k, strip_nulls(v)))
                .collect(),
        ),
        Value::Array(items) => Value::Array(items.into_iter().map(strip_nulls).collect()),
        other => other,
    }
}

#[test]
fn configuration_errors_exit_with_one() {
    let r = run("analyze", Some(&scalar(-1.0, 0.0, -0.5, 1.0, "chi = 1\n")), &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("tau"), "{}", r.stderr());
    assert!(!r.out.join("report.json").exists());

    let r = run("analyze", Some("tau = 0.1\nperiod = 1.0\nbogus = 3\n[system]\nkind = \"linear\"\na = [[1.0]]\nb = [[0.0]]\n"), &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("bogus"), "{}", r.stderr());

    let r = run("analyze", None, &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("--config"));

    let r = run("solve", Some(&scalar(-1.0, 0.0, 0.0, 1.0, "chi = 1\n")), &[]);
    assert_eq!(r.code(), 1);
    assert!(r.stderr().contains("domain"), "{}", r.stderr());
}
