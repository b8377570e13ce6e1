use std::fs;
use std::path::{Path, PathBuf};

use mrac_cli::{cmd_reproduce, cmd_run, cmd_verify, EXIT_CHECK_FAILED, EXIT_INPUT, EXIT_OK};
use mrac_core::harness::{RunSummary, SUMMARY_FILE};
use mrac_core::ConfigFile;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

struct Captured {
    code: i32,
    out: String,
    err: String,
}

fn capture(f: impl FnOnce(&mut Vec<u8>, &mut Vec<u8>) -> i32) -> Captured {
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = f(&mut out, &mut err);
    Captured {
        code,
        out: String::from_utf8(out).unwrap(),
        err: String::from_utf8(err).unwrap(),
    }
}

fn trace_rows(dir: &Path) -> usize {
    fs::read_to_string(dir.join("trace.csv")).unwrap().lines().count() - 2
}

#[test]
fn run_writes_outputs_and_honors_steps() {
    let dir = tempfile::tempdir().unwrap();
    let res = capture(|o, e| cmd_run(&config("nominal.json"), dir.path(), Some(250), None, o, e));
    assert_eq!(res.code, EXIT_OK, "{}", res.err);
    for f in ["trace.csv", "summary.json", "plot.gp", "truth.json"] {
        assert!(dir.path().join(f).exists(), "{f} missing");
    }
    assert_eq!(trace_rows(dir.path()), 251);
}

#[test]
fn summary_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(capture(|o, e| cmd_run(&config("delay2.json"), dir.path(), None, None, o, e)).code, EXIT_OK);
    let summary: RunSummary = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    let original = ConfigFile::from_json(&fs::read_to_string(config("delay2.json")).unwrap())
        .unwrap()
        .resolve()
        .unwrap();
    assert_eq!(summary.config.resolve().unwrap(), original);
    assert!(summary.passed);
}

#[test]
fn beta0_interval_through_zero_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("nominal.json"))
        .unwrap()
        .replace("\"lo\": [-2.0, -2.5, 1.5, -1.0]", "\"lo\": [-2.0, -2.5, -1.5, -1.0]");
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let res = capture(|o, e| cmd_run(&path, &dir.path().join("out"), None, None, o, e));
    assert_eq!(res.code, EXIT_INPUT);
    assert!(res.err.contains("estimator.box"), "{}", res.err);
    assert!(!dir.path().join("out").exists());
}

#[test]
fn malformed_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(config("nominal.json")).unwrap().replace("\"d\": 1", "\"d\": \"one\"");
    let path = dir.path().join("bad.json");
    fs::write(&path, text).unwrap();
    let res = capture(|o, e| cmd_run(&path, dir.path(), None, None, o, e));
    assert_eq!(res.code, EXIT_INPUT);
    assert!(res.err.contains("plant.d"), "{}", res.err);
}

#[test]
fn verify_config_passes() {
    for name in ["nominal.json", "delay2.json", "time_varying.json"] {
        let res = capture(|o, e| cmd_verify(Some(&config(name)), None, None, o, e));
        assert_eq!(res.code, EXIT_OK, "{name}: {}{}", res.out, res.err);
        assert!(res.out.contains("all checks passed"));
    }
}

#[test]
fn tampered_trace_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(capture(|o, e| cmd_run(&config("nominal.json"), dir.path(), Some(300), None, o, e)).code, EXIT_OK);
    let trace = dir.path().join("trace.csv");
    assert_eq!(capture(|o, e| cmd_verify(None, Some(&trace), None, o, e)).code, EXIT_OK);

    // nudge one output sample
    let text = fs::read_to_string(&trace).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut cols: Vec<String> = lines[102].split(',').map(String::from).collect();
    let y: f64 = cols[1].parse().unwrap();
    cols[1] = format!("{:.16e}", y + 1e-3);
    lines[102] = cols.join(",");
    fs::write(&trace, lines.join("\n") + "\n").unwrap();

    let res = capture(|o, e| cmd_verify(None, Some(&trace), None, o, e));
    assert_eq!(res.code, EXIT_CHECK_FAILED, "{}", res.out);
    assert!(res.out.contains("FAIL"));
}

#[test]
fn lambda_below_floor_is_rejected() {
    let res = capture(|o, e| cmd_verify(Some(&config("nominal.json")), None, Some(0.5), o, e));
    assert_eq!(res.code, EXIT_INPUT);
    assert!(res.err.contains("spectral floor"), "{}", res.err);
    let res = capture(|o, e| cmd_verify(Some(&config("nominal.json")), None, Some(0.9), o, e));
    assert_eq!(res.code, EXIT_OK);
    assert!(res.out.contains("c(0.9)"));
}

#[test]
fn reproduce_is_deterministic() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = capture(|o, e| cmd_reproduce(a.path(), o, e));
    assert_eq!(first.code, EXIT_OK);
    assert_eq!(capture(|o, e| cmd_reproduce(b.path(), o, e)).out, first.out);
    assert_eq!(trace_rows(a.path()), 1001);
    for f in ["trace.csv", "summary.json", "plot.gp", "truth.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
    }
}
