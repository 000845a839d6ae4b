use std::io::Write;
use std::process::{Command, Output, Stdio};

fn spencerkit(args: &[&str], stdin: Option<&str>, env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_spencerkit"));
    cmd.args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped());
    for (k, v) in env {
        cmd.env(k, v);
    }
    let mut child = cmd.spawn().unwrap();
    let input = child.stdin.take().unwrap();
    if let Some(text) = stdin {
        let mut input = input;
        input.write_all(text.as_bytes()).unwrap();
    }
    child.wait_with_output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

const ZBAR: &str = r#"{
  "name": "zbar",
  "n": 1,
  "box": {"lo": [-1, -1], "hi": [1, 1]},
  "J": [["0", "-1"], ["1", "0"]],
  "functions": {"zbar": "x1 - (0+1i)*x2"},
  "tasks": [{"task": "cr_check", "function": "zbar"}, {"task": "check_acs", "label": "acs"}]
}"#;

#[test]
fn version_matches_the_build() {
    let o = spencerkit(&["version"], None, &[]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o).trim(),
        format!("spencerkit {}", env!("CARGO_PKG_VERSION"))
    );
}

#[test]
fn builtin_prints_a_runnable_scenario() {
    let o = spencerkit(&["builtin", "twisted_r4"], None, &[]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.contains("\"name\": \"twisted_r4\""));
    let run = spencerkit(&["run", "-"], Some(&text), &[]);
    assert_eq!(run.status.code(), Some(0));
    assert!(stdout(&run).contains("\"overall\": \"pass\""));
    let missing = spencerkit(&["builtin", "nope"], None, &[]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("std_c1"));
}

#[test]
fn failing_scenario_exits_one() {
    let o = spencerkit(&["run", "-"], Some(ZBAR), &[]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.contains("\"overall\": \"fail\""));
    assert!(out.contains("\"cr_residual\": 2.0000000000000000e0"));
}

#[test]
fn tolerance_override_and_task_filter() {
    let loose = spencerkit(&["run", "-", "--tol", "cr=3"], Some(ZBAR), &[]);
    assert_eq!(loose.status.code(), Some(0));
    assert!(stdout(&loose).contains("\"cr\": 3.0000000000000000e0"));
    let only = spencerkit(&["run", "-", "--task", "acs"], Some(ZBAR), &[]);
    assert_eq!(only.status.code(), Some(0));
    assert!(!stdout(&only).contains("cr_residual"));
    let none = spencerkit(&["run", "-", "--task", "missing"], Some(ZBAR), &[]);
    assert_eq!(none.status.code(), Some(2));
}

#[test]
fn grid_override_reaches_tasks() {
    let o = spencerkit(
        &[
            "run", "-", "--task", "acs", "--grid", "3", "--format", "text",
        ],
        Some(ZBAR),
        &[],
    );
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    assert!(out.contains("grid_points = 9.0000000000000000e0"), "{out}");
    assert!(out.ends_with("overall: pass\n"));
}

#[test]
fn invalid_input_exits_two() {
    for (args, input) in [
        (vec!["run", "-"], "{ not json"),
        (
            vec!["run", "-"],
            r#"{"name": "x", "n": 1, "box": {"lo": [0], "hi": [1]}, "J": []}"#,
        ),
        (vec!["run", "-", "--tol", "bogus=1"], ZBAR),
        (vec!["run", "-", "--grid", "0"], ZBAR),
        (vec!["run", "/nonexistent/scenario.json"], ""),
        (vec!["frobnicate"], ""),
    ] {
        let o = spencerkit(&args, Some(input), &[]);
        assert_eq!(
            o.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&o.stderr)
        );
    }
}

#[test]
fn thread_cap_does_not_change_reports() {
    let text = stdout(&spencerkit(&["builtin", "std_c1"], None, &[]));
    let one = spencerkit(&["run", "-"], Some(&text), &[("SPENCERKIT_THREADS", "1")]);
    let two = spencerkit(&["run", "-"], Some(&text), &[("SPENCERKIT_THREADS", "2")]);
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(one.stdout, two.stdout);
    let bad = spencerkit(&["version"], None, &[("SPENCERKIT_THREADS", "zero")]);
    assert_eq!(bad.status.code(), Some(2));
}
