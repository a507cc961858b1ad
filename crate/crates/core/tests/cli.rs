use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_otfluct"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let p = dir.join("c.toml");
    std::fs::write(&p, text).unwrap();
    p
}

const SMALL: &str = r#"
seed = 4

[params]
alphas = [0.4]
gamma = 1.0
theta = 1.0

[simulation]
replicates = 40
n_ladder = [2.0]
t_grid = [0.5, 1.0]
steps = 64

[[functions]]
kind = "gaussian_bump"
center = [0.0]
widths = [1.0]
"#;

#[test]
fn regimes_table_rows() {
    let o = run(&["regimes", "--alphas", "0.4"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "alpha_bar,regime,norming,theorem\n2.5,large,sqrt(n),2.1\n");
    let o = run(&["regimes", "--alphas", "0.5"]);
    assert!(stdout(&o).ends_with("2,critical,sqrt(n ln n),2.2\n"), "{}", stdout(&o));
    let o = run(&["regimes", "--alphas", "1.5,1.5"]);
    assert!(stdout(&o).contains("intermediate"));
    assert!(stdout(&o).trim_end().ends_with(",2.3"));
    let o = run(&["regimes", "--alphas", "2.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
}

#[test]
fn verify_writes_report_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("kernels.toml");
    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let report = std::fs::read_to_string(dir.path().join("report.csv")).unwrap();
    assert!(report.starts_with("suite,check,n,estimate,target,budget,pass\n"));
    assert!(report.lines().skip(1).all(|l| l.ends_with(",true")));
    let meta: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metadata.json")).unwrap()).unwrap();
    assert_eq!(meta["seed"], 9);
    assert_eq!(meta["command"], "verify");
    assert!(meta["version"].as_str().unwrap().starts_with('v'));
    assert!(meta["wall_time_s"].as_f64().unwrap() > 0.0);
}

#[test]
fn failing_check_sets_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let text = SMALL.replace("seed = 4", "seed = 4\nsuites = [\"covariance-vs-limit\"]")
        .replace("steps = 64", "steps = 64\ngap_budget = 0.0");
    let cfg = write_config(dir.path(), &text);
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.lines().any(|l| l.ends_with(",false")), "{out}");
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL"));
}

#[test]
fn empty_suite_list_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(stdout(&o), "suite,check,n,estimate,target,budget,pass\n");
}

#[test]
fn simulate_to_stdout_and_directory() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let c = cfg.to_str().unwrap();
    let a = run(&["simulate", "--config", c, "--threads", "1"]);
    let b = run(&["simulate", "--config", c, "--threads", "2"]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = stdout(&a);
    assert!(text.starts_with("replicate,t,phi_id,value\n"));
    assert_eq!(text.lines().count(), 1 + 40 * 2);
    let out = dir.path().join("out");
    let o = run(&["simulate", "--config", c, "--out", out.to_str().unwrap(), "--event-logs", "2"]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(out.join("samples_n2.csv")).unwrap(), a.stdout);
    let events = std::fs::read_to_string(out.join("events_n2_r0.csv")).unwrap();
    assert!(events.starts_with("id,parent,birth_t,split_t,k,x_1\n"), "{events}");
    assert!(out.join("events_n2_r1.csv").exists() && !out.join("events_n2_r2.csv").exists());
    assert!(out.join("metadata.json").exists());
}

#[test]
fn limits_and_field_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!("{SMALL}\n[field]\nwhich = [\"y2\"]\nalphas = [0.4]\npoints = [[0.5], [1.0], [2.0]]\ndraws = 5\n");
    let cfg = write_config(dir.path(), &text);
    let c = cfg.to_str().unwrap();
    let o = run(&["limits", "--config", c]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("regime,r,t,params_hash,value,err"));
    assert_eq!(lines.count(), 4);
    let out = dir.path().join("f");
    let o = run(&["field", "--config", c, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let cov = std::fs::read_to_string(out.join("field_y2.csv")).unwrap();
    assert!(cov.starts_with("row,col,value\n"));
    assert_eq!(cov.lines().count(), 1 + 9);
    let draws = std::fs::read_to_string(out.join("field_y2_draws.csv")).unwrap();
    assert_eq!(draws.lines().count(), 1 + 5 * 3);
}

#[test]
fn bad_input_is_reported_on_stderr() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace("alphas = [0.4]", "alphas = [1.5]"));
    let o = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(o.stdout.is_empty());
    assert!(String::from_utf8_lossy(&o.stderr).contains("must exceed 1"));
    let o = run(&["verify", "--config", cfg.to_str().unwrap(), "--suite", "nonsense"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["verify"]);
    assert_eq!(o.status.code(), Some(2));
}
