use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn redcalc() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_redcalc"));
    cmd.env_remove("REDCALC_ITER_CAP");
    cmd
}

fn run(args: &[&str]) -> Output {
    redcalc().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn bundle() -> (TempDir, PathBuf) {
    let dir = TempDir::new().unwrap();
    let root = dir.path().to_path_buf();
    let o = run(&["bundle", "--out", root.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    (dir, root)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const RING: &str = r#"{
    "vertices": [
        {"id": "A", "service": {"rate": 10, "latency": 1}},
        {"id": "B", "service": {"rate": 10, "latency": 1}},
        {"id": "C", "service": {"rate": 10, "latency": 1}},
        {"id": "D", "service": {"rate": 10, "latency": 1}}
    ],
    "edges": [{"from": "A", "to": "B"}, {"from": "B", "to": "C"}, {"from": "C", "to": "D"}, {"from": "D", "to": "A"}],
    "flows": [
        {"id": "f1", "source": "A", "destinations": ["C"], "edges": [["A", "B"], ["B", "C"]],
         "arrival": {"segments": [{"rate": 2, "burst": 1}]}, "lmin": 1, "lmax": 1},
        {"id": "f2", "source": "C", "destinations": ["A"], "edges": [["C", "D"], ["D", "A"]],
         "arrival": {"segments": [{"rate": 2, "burst": 1}]}, "lmin": 1, "lmax": 1}
    ]
}"#;

#[test]
fn toy_report_carries_the_elimination_curve() {
    let (_dir, root) = bundle();
    let o = run(&["analyze", "--model", "tight", "--in", p(&root.join("networks/toy-pef.json"))]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let pef = &report["pefs"][0];
    assert_eq!(pef["vertex"], "F");
    let segments = &pef["tight"]["segments"];
    assert_eq!(segments[0], serde_json::json!({"rate": "2", "burst": "4"}));
    assert_eq!(segments[1], serde_json::json!({"rate": "1", "burst": "8"}));
    // The report re-parses to the same values.
    let again: serde_json::Value = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
    assert_eq!(again, report);
}

#[test]
fn regulator_after_elimination_bound_is_fourteen() {
    let (dir, root) = bundle();
    let out = dir.path().join("toy.csv");
    let o = run(&[
        "analyze",
        "--in",
        p(&root.join("networks/toy-pef-pfr.json")),
        "--lossless",
        "--format",
        "csv",
        "--out",
        p(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    assert_eq!(csv.lines().nth(1), Some("f,F,tight,0,14,,none"));
}

#[test]
fn unbounded_regulator_exits_two() {
    let (_dir, root) = bundle();
    let o = run(&["analyze", "--in", p(&root.join("networks/toy-pef-ir13.json"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("IR_AFTER_PEF_NO_POF"));
}

#[test]
fn empty_flow_set_is_fine() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("empty.json");
    std::fs::write(&file, r#"{"vertices": [{"id": "A"}], "edges": [], "flows": []}"#).unwrap();
    let o = run(&["analyze", "--in", p(&file), "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn malformed_input_names_the_json_path() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("bad.json");
    std::fs::write(
        &file,
        r#"{"vertices": [{"id": "A", "service": {"rate": "x", "latency": 0}}], "edges": [], "flows": []}"#,
    )
    .unwrap();
    let o = run(&["analyze", "--in", p(&file)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("$.vertices[0]"), "{}", stderr(&o));
    let missing = run(&["analyze", "--in", p(&dir.path().join("nope.json"))]);
    assert_eq!(missing.status.code(), Some(1));
    let usage = run(&["analyze", "--bogus"]);
    assert_eq!(usage.status.code(), Some(1));
}

#[test]
fn iteration_cap_comes_from_the_environment() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("ring.json");
    std::fs::write(&file, RING).unwrap();
    let free = run(&["analyze", "--in", p(&file)]);
    assert_eq!(free.status.code(), Some(0), "{}", stderr(&free));
    let capped = redcalc().args(["analyze", "--in", p(&file)]).env("REDCALC_ITER_CAP", "1").output().unwrap();
    assert_eq!(capped.status.code(), Some(2));
    assert!(stdout(&capped).contains("iteration-cap"));
    let burst = run(&["analyze", "--in", p(&file), "--burst-cap", "1/2"]);
    assert_eq!(burst.status.code(), Some(2));
    assert!(stdout(&burst).contains("diverged"));
}

#[test]
fn verify_notes_attainment() {
    let (_dir, root) = bundle();
    let o = run(&[
        "verify",
        "--scenario",
        p(&root.join("scenarios/toy-regulated.json")),
        "--network",
        p(&root.join("networks/toy-pef-pfr.json")),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("bound (network): [0, 14]"));
    assert!(stdout(&o).contains("sound: yes (bound attained)"));
}

#[test]
fn verify_confirms_divergence() {
    let (_dir, root) = bundle();
    let o = run(&["verify", "--scenario", p(&root.join("scenarios/ir-divergence-2.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("unbounded (IR_AFTER_PEF_NO_POF)"));
    assert!(stdout(&o).contains("divergence confirmed"));
}

#[test]
fn zero_jitter_is_trivially_sound() {
    let (_dir, root) = bundle();
    let o = run(&["verify", "--scenario", p(&root.join("scenarios/zero-jitter.json")), "--format", "json"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(report["sound"], true);
    assert_eq!(report["measured_max"], "3");
}

#[test]
fn verify_fails_when_a_delay_escapes_the_bound() {
    let (dir, root) = bundle();
    // Tighten the bound below the trajectory: the toy network with a faster D.
    let text = std::fs::read_to_string(root.join("networks/toy-pef-pfr.json")).unwrap();
    let mut net: serde_json::Value = serde_json::from_str(&text).unwrap();
    for v in net["vertices"].as_array_mut().unwrap() {
        if v["id"] == "D" {
            v["tech_latency"] = serde_json::json!({"min": "0", "max": "0"});
        }
    }
    let file = dir.path().join("fast.json");
    std::fs::write(&file, net.to_string()).unwrap();
    let o = run(&["verify", "--scenario", p(&root.join("scenarios/toy-regulated.json")), "--network", p(&file)]);
    assert_eq!(o.status.code(), Some(2), "{}", stdout(&o));
    assert!(stdout(&o).contains("sound: no"));
}

#[test]
fn simulate_writes_a_trace() {
    let (dir, root) = bundle();
    let trace = dir.path().join("trace.csv");
    let o = run(&["simulate", "--scenario", p(&root.join("scenarios/toy-burst.json")), "--trace-out", p(&trace)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("delay range [0, 7]"));
    let csv = std::fs::read_to_string(trace).unwrap();
    assert!(csv.starts_with("time,point,unit,flow,size\n"));
    assert!(csv.contains("8,pef,7,f,1"));
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"flows\": 3}").unwrap();
    assert_eq!(run(&["simulate", "--scenario", p(&bad)]).status.code(), Some(1));
}

#[test]
fn compare_shows_dominance_on_the_automotive_topology() {
    let (_dir, root) = bundle();
    let o = run(&["compare", "--in", p(&root.join("networks/volvo.json"))]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("rows strictly improved"));
    assert!(stdout(&o).starts_with("flow,destination,tight_upper,intuitive_upper,gain"));
}
