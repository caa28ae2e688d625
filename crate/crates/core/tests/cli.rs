use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../scenarios")
        .join(name)
}

fn vcz(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vcz"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

/// Copy of a shipped scenario with one textual substitution.
fn variant(dir: &Path, name: &str, from: &str, to: &str) -> PathBuf {
    let text = std::fs::read_to_string(scenario(name)).unwrap();
    assert!(text.contains(from), "{from} not in {name}");
    let path = dir.join(format!("variant-{name}"));
    std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn feasibility_reports_running_example() {
    let o = vcz(&[
        "feasibility",
        "--scenario",
        s(&scenario("pendulum_invariance.toml")),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], true);
    assert_eq!(v["resolved"]["lambda"], 0.018);
}

#[test]
fn low_torque_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let p = variant(
        dir.path(),
        "pendulum_invariance.toml",
        "tau_bar = [2.0]",
        "tau_bar = [1.5]",
    );
    let o = vcz(&["feasibility", "--scenario", s(&p)]);
    assert_eq!(code(&o), 2);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["pass"], false);
    assert!(v["check"]["torque_slack"][0].as_f64().unwrap() < 0.0);
}

#[test]
fn parse_errors_exit_4() {
    let dir = tempfile::tempdir().unwrap();
    let p = variant(
        dir.path(),
        "pendulum_invariance.toml",
        "seed = 1",
        "seed = 1\ncolour = 3",
    );
    assert_eq!(code(&vcz(&["feasibility", "--scenario", s(&p)])), 4);
    let p = variant(dir.path(), "scara_reach.toml", "schema = 1", "schema = 2");
    assert_eq!(
        code(&vcz(&["synthesize", "--scenario", s(&p), "--out", "x"])),
        4
    );
    assert_eq!(code(&vcz(&["simulate"])), 4);
    assert_eq!(code(&vcz(&["no-such-command"])), 4);
}

#[test]
fn obstructed_goal_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let p = variant(
        dir.path(),
        "scara_reach.toml",
        "[disturbance]",
        "obstacles = [[[0.6, 0.9], [-0.9, -0.6]]]\n\n[disturbance]",
    );
    let o = vcz(&[
        "synthesize",
        "--scenario",
        s(&p),
        "--out",
        s(&dir.path().join("c.json")),
    ]);
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn synthesize_then_simulate() {
    let dir = tempfile::tempdir().unwrap();
    let ctrl = dir.path().join("ctrl.json");
    let sc = scenario("pendulum_sweep.toml");
    let o = vcz(&["synthesize", "--scenario", s(&sc), "--out", s(&ctrl)]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stats: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(stats["cells"].as_u64().unwrap() > 0);
    let out = dir.path().join("run");
    let o = vcz(&[
        "simulate",
        "--scenario",
        s(&sc),
        "--controller",
        s(&ctrl),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in [
        "trajectory.csv",
        "report.json",
        "plot_position.csv",
        "plot_velocity.csv",
        "plot_torque.csv",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn wide_funnel_breaches_with_exit_3() {
    let dir = tempfile::tempdir().unwrap();
    let p = variant(
        dir.path(),
        "pendulum_invariance.toml",
        "p = [0.2]",
        "p = [1.0]",
    );
    let out = dir.path().join("run");
    let o = vcz(&["simulate", "--scenario", s(&p), "--out", s(&out)]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.lines().count() > 2, "partial trajectory kept");
}

#[test]
fn benchmark_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = vcz(&[
        "benchmark",
        "--scenario",
        s(&scenario("pendulum_invariance.toml")),
        "--scenario",
        s(&scenario("scara_reach.toml")),
        "--out",
        s(dir.path()),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let md = std::fs::read_to_string(dir.path().join("benchmark.md")).unwrap();
    assert!(md.contains("| scara-reach | full-state | 4 | estimated |"));
    assert!(dir.path().join("benchmark.csv").exists());
}
