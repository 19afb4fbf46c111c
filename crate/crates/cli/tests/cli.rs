use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_speedbal"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn solve_emits_schedule() {
    let out = run(&["solve", path(&fixture("two_jobs.json"))]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["energy"], 37.0);
    assert_eq!(v["makespan"], 1.0);
    assert_eq!(v["speeds"]["a"], 6.0);
    assert_eq!(v["segments"].as_array().unwrap().len(), 2);
}

#[test]
fn solve_is_byte_for_byte_deterministic() {
    let a = run(&["solve", path(&fixture("idle_fast_job.json"))]);
    let b = run(&["solve", path(&fixture("idle_fast_job.json"))]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn verify_accepts_solver_output_in_either_order() {
    let dir = tempfile::tempdir().unwrap();
    let sched = dir.path().join("schedule.json");
    let inst = fixture("idle_fast_job.json");
    let out = run(&["solve", path(&inst), "-o", sched.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());

    for args in [
        [sched.to_str().unwrap(), path(&inst)],
        [path(&inst), sched.to_str().unwrap()],
    ] {
        let out = run(&["verify", args[0], args[1]]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stdout)
        );
        assert_eq!(json(&out.stdout)["passed"], true);
    }
}

#[test]
fn verify_reports_witness() {
    let out = run(&[
        "verify",
        path(&fixture("bad_schedule.json")),
        path(&fixture("idle_fast_job.json")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let v = json(&out.stdout);
    assert_eq!(v["passed"], false);
    assert_eq!(v["feasibility"]["passed"], true);
    let p2 = &v["kkt"]["properties"][1];
    assert_eq!(p2["property"], 2);
    assert_eq!(p2["witness"]["job"], "a");
    assert_eq!(p2["witness"]["other"], "b");
    assert_eq!(p2["witness"]["interval"], 0);
}

#[test]
fn mbal_finds_makespan() {
    let out = run(&[
        "mbal",
        "--energy",
        "4",
        path(&fixture("one_job_budget.json")),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert!((v["x_star"].as_f64().unwrap() - 1.0).abs() < 1e-8);
    assert!(v["schedule"]["energy"].as_f64().unwrap() <= 4.0 * (1.0 + 1e-9));

    let out = run(&[
        "mbal",
        "--energy",
        "2",
        path(&fixture("one_job_budget.json")),
    ]);
    assert!((json(&out.stdout)["x_star"].as_f64().unwrap() - 2.0).abs() < 1e-8);
}

#[test]
fn trace_and_network_dump_go_to_stderr() {
    let out = run(&["solve", path(&fixture("two_jobs.json")), "--trace"]);
    let trace = json(&out.stderr);
    assert_eq!(trace[0]["s_crit"], 6.0);
    assert_eq!(trace[0]["critical_jobs"][0], "a");
    assert_eq!(trace[1]["tight_intervals"][0], 0);
    json(&out.stdout);

    let out = run(&["solve", path(&fixture("two_jobs.json")), "--dump-network"]);
    let text = String::from_utf8(out.stderr).unwrap();
    assert!(text.contains("s x:a 1 1\n"), "{text}");
    assert!(text.contains("# step 1 speed 1\n"), "{text}");
}

#[test]
fn gantt_has_one_row_per_machine() {
    let out = run(&[
        "solve",
        path(&fixture("two_jobs.json")),
        "--format",
        "gantt",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| l.starts_with('M')).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].contains(&"A".repeat(64)));
    assert!(text.contains("A = a (speed 6)"));
}

#[test]
fn overrides_change_the_instance() {
    let out = run(&["solve", path(&fixture("two_jobs.json")), "--machines", "1"]);
    let v = json(&out.stdout);
    assert_eq!(v["speeds"]["a"], 7.0);
    assert_eq!(v["energy"], 49.0);
}

#[test]
fn input_errors_exit_two_with_json() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"alpha": 2, "machines": 1, "jobs": [{"id": "x", "work": 0, "release": 0, "deadline": 2}]}"#,
    )
    .unwrap();
    let out = run(&["solve", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"], "NonPositiveWork");

    let out = run(&["solve", "/nonexistent/instance.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"], "Io");

    let out = run(&[
        "solve",
        path(&fixture("two_jobs.json")),
        "--tol-speed",
        "-1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"], "BadTolerance");

    let out = run(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(json(&out.stderr)["error"], "Usage");
}

#[test]
fn hidden_oracle_matches_solver() {
    let dir = tempfile::tempdir().unwrap();
    let one = dir.path().join("one.json");
    std::fs::write(
        &one,
        r#"{"alpha": 2, "machines": 1, "jobs": [{"id": "p", "work": 2, "release": 0, "deadline": 1}, {"id": "q", "work": 1, "release": 1, "deadline": 3}]}"#,
    )
    .unwrap();
    let out = run(&["oracle", one.to_str().unwrap()]);
    let v = json(&out.stdout);
    assert_eq!(v["method"], "yds");
    assert_eq!(v["speeds"]["q"], 0.5);

    let out = run(&[
        "oracle",
        "--method",
        "brute",
        path(&fixture("two_jobs.json")),
    ]);
    assert!((json(&out.stdout)["energy"].as_f64().unwrap() - 37.0).abs() < 1e-6);
}
