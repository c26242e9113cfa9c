//! Exit-code and side-effect checks for the command-line front end.

use std::path::Path;

fn run(args: &[&str]) -> (i32, String) {
    let argv: Vec<String> =
        std::iter::once("memgrid".to_string()).chain(args.iter().map(|s| s.to_string())).collect();
    let mut out = Vec::new();
    let code = memgrid::cli::run(&argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn make_array(path: &Path) {
    let (code, _) = run(&[
        "new", "--m", "2", "--n", "2", "--model", "sigmoid:1,3,1",
        "--phi", "[0,0,0,0]", "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
}

#[test]
fn unknown_subcommand_and_bad_flags_exit_2() {
    assert_eq!(run(&["frobnicate"]).0, 2);
    assert_eq!(run(&["new", "--m", "2"]).0, 2);
    // both or neither of --w / --phi
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let out = out.to_str().unwrap();
    assert_eq!(run(&["new", "--m", "1", "--n", "1", "--model", "sigmoid:1,3,1", "--out", out]).0, 2);
}

#[test]
fn help_goes_to_stdout_with_exit_0() {
    let (code, stdout) = run(&["--help"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("memgrid"));
}

#[test]
fn new_rejects_unrealizable_memductance_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("a.json");
    let (code, _) = run(&[
        "new", "--m", "1", "--n", "1", "--model", "sigmoid:1,3,1",
        "--w", "[[5]]", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(code, 2);
    assert!(!out.exists());
}

#[test]
fn read_rejects_zero_amplitude_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let array = dir.path().join("a.json");
    make_array(&array);
    let (code, _) = run(&["read", array.to_str().unwrap(), "--amplitude", "0"]);
    assert_eq!(code, 2);
}

#[test]
fn write_gain_violation_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let array = dir.path().join("a.json");
    make_array(&array);
    // beta = 0.5 here, so alpha * T must stay below 4
    let (code, _) = run(&[
        "write", array.to_str().unwrap(), "--target", "[[2,2],[2,2]]",
        "--alpha", "4", "--T", "1",
    ]);
    assert_eq!(code, 3);
}

#[test]
fn write_unrealizable_target_exits_4_and_leaves_file_alone() {
    let dir = tempfile::tempdir().unwrap();
    let array = dir.path().join("a.json");
    make_array(&array);
    let before = std::fs::read(&array).unwrap();
    let (code, _) = run(&[
        "write", array.to_str().unwrap(), "--target", "[[2,2],[2,5]]",
        "--alpha", "3", "--T", "1",
    ]);
    assert_eq!(code, 4);
    assert_eq!(std::fs::read(&array).unwrap(), before);
}

#[test]
fn missing_array_file_exits_5() {
    assert_eq!(run(&["read", "/nonexistent/a.json"]).0, 5);
}

#[test]
fn read_trace_and_write_traces_are_emitted() {
    let dir = tempfile::tempdir().unwrap();
    let array = dir.path().join("a.json");
    make_array(&array);

    let trace = dir.path().join("read.csv");
    let (code, _) = run(&["read", array.to_str().unwrap(), "--trace", trace.to_str().unwrap()]);
    assert_eq!(code, 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.starts_with("time,"));
    assert!(text.lines().count() > 2);

    let traces = dir.path().join("cells");
    let (code, stdout) = run(&[
        "write", array.to_str().unwrap(), "--target", "[[1.5,2.5],[2.0,1.2]]",
        "--alpha", "3", "--T", "1", "--mode", "diagonal",
        "--trace-dir", traces.to_str().unwrap(),
    ]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"iterations\""));
    for (k, l) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
        assert!(traces.join(format!("cell_{k}_{l}.csv")).exists());
    }
}

#[test]
fn verify_and_reach_report_json() {
    let (code, stdout) = run(&["verify", "--model", "sigmoid:1,3,1"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"lipschitz_ok\":true"));

    let dir = tempfile::tempdir().unwrap();
    let array = dir.path().join("a.json");
    make_array(&array);
    let (code, stdout) =
        run(&["reach", array.to_str().unwrap(), "--phi-target", "[1,-1,-1,1]"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"reachable\":false"));

    // column-major (1,1,0,0) shifts every cell of column 0 by one: that is
    // the move produced by p_a = (1,0), p_b = 0 held for unit time
    let (code, stdout) = run(&["reach", array.to_str().unwrap(), "--phi-target", "[1,1,0,0]"]);
    assert_eq!(code, 0);
    assert!(stdout.contains("\"reachable\":true"));
    let (code, stdout) = run(&["lstsq", array.to_str().unwrap(), "--c", "[1,1]"]);
    assert_eq!(code, 0);
    let y: Vec<f64> = serde_json::from_str(stdout.trim()).unwrap();
    assert_eq!(y.len(), 2);
}
