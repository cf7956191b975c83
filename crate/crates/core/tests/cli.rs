//! Exit-code contract and output plumbing of the `nls-lab` binary.

use std::process::{Command, Output};

use nls_lab::report::body_of;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nls-lab")).args(args).env_remove("NLS_LAB_THREADS").output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

#[test]
fn count_prints_six() {
    let o = run(&["count", "--l", "0", "--q", "-8", "--bound", "8", "--mode", "alternating", "--exclude-pairings"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(stdout(&o), "6\n");
}

#[test]
fn count_both_methods_agree() {
    let o = run(&["count", "--l", "3", "--q", "5", "--bound", "12", "--exclude-pairings", "--method", "both"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn count_elementary_and_weighted() {
    let o = run(&["count", "--kind", "elementary", "--signs", "1,-1,1,-1", "--levels", "4,4,4,4"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    stdout(&o).trim().parse::<u64>().unwrap();
    let o = run(&["count", "--kind", "weighted", "--levels", "1,1,1,2,2,2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = run(&["count", "--kind", "weighted", "--levels", "1,1"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&["verify", "--help"])), 0);
}

#[test]
fn missing_kind_prints_usage() {
    for cmd in ["verify", "probe", "functional"] {
        let o = run(&[cmd]);
        assert_eq!(code(&o), 1, "{cmd}");
        let err = stderr(&o);
        assert!(err.contains("missing required parameter `kind`"), "{err}");
        assert!(err.contains(&format!("Usage: nls-lab {cmd}")), "{err}");
    }
}

#[test]
fn unknown_flag_and_subcommand() {
    let o = run(&["sample", "--bogus"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("unexpected argument"));
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&[])), 1);
}

#[test]
fn unreadable_config() {
    let o = run(&["--config", "/nonexistent/lab.toml", "sample"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("cannot read config"), "{}", stderr(&o));

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[sample\ns = ").unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "sample"]);
    assert_eq!(code(&o), 1);

    std::fs::write(&path, "[sample]\nno_such_key = 1\n").unwrap();
    let o = run(&["--config", path.to_str().unwrap(), "sample"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("no_such_key"), "{}", stderr(&o));
}

#[test]
fn budget_guard_trips() {
    let o = run(&["functional", "--kind", "T", "--N", "20"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("budget exceeded"), "{}", stderr(&o));
}

#[test]
fn bad_thread_env() {
    let o = Command::new(env!("CARGO_BIN_EXE_nls-lab"))
        .args(["count", "--l", "0", "--q", "-8"])
        .env("NLS_LAB_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("NLS_LAB_THREADS"));
}

#[test]
fn sample_replays_byte_identically() {
    let args = ["sample", "--n-samples", "3", "--seed", "11", "--format", "csv"];
    let a = stdout(&run(&args));
    let b = stdout(&run(&args));
    assert!(a.contains("# config-hash: "));
    assert!(a.lines().any(|l| l.starts_with("# generated-unix: ")));
    assert_eq!(body_of(&a), body_of(&b));
    let c = stdout(&run(&["sample", "--n-samples", "3", "--seed", "12", "--format", "csv"]));
    assert_ne!(body_of(&a), body_of(&c));
}

#[test]
fn evolve_trajectory_csv() {
    let o = run(&["evolve", "--N", "4", "--t", "0.2", "--n-saves", "4", "--format", "csv"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let rows: Vec<&str> = out.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "hamiltonian,hsigma_norm,mass,t");
    assert_eq!(rows.len(), 1 + 5);
}

#[test]
fn functional_record_fields() {
    let o = run(&["functional", "--kind", "N", "--N", "3"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    let rec: serde_json::Value = serde_json::from_str(out.lines().nth(1).unwrap()).unwrap();
    for key in ["kind", "s", "N", "value_re", "value_im", "terms", "wall_ms"] {
        assert!(rec.get(key).is_some(), "{key} missing in {rec}");
    }
    assert_eq!(rec["kind"], "N");
    assert!(rec["wall_ms"].is_null());
    let o = run(&["functional", "--kind", "N", "--N", "3", "--timing"]);
    let rec: serde_json::Value = serde_json::from_str(stdout(&o).lines().nth(1).unwrap()).unwrap();
    assert!(rec["wall_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn verify_poincare_dulac_passes() {
    let o = run(&["verify", "--kind", "poincare-dulac", "--s", "1.2", "--N", "4", "--seed", "7"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let out = stdout(&o);
    assert!(out.starts_with("{\"header\""));
    assert_eq!(out.lines().count(), 1 + 3);
}

#[test]
fn verify_failure_exits_two() {
    // steps far outside the quadratic regime
    let o = run(&["verify", "--kind", "poincare-dulac", "--N", "4", "--n-samples", "1", "--h", "0.5,0.25,0.125"]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}

#[test]
fn probe_levelset_runs() {
    let o = run(&["probe", "--kind", "levelset", "--levels", "1,2,4", "--trials", "2"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lab.toml");
    std::fs::write(&path, "seed = 5\nformat = \"csv\"\n[sample]\nn_samples = 2\ns = 2.0\n").unwrap();
    let p = path.to_str().unwrap();
    let out = stdout(&run(&["--config", p, "sample"]));
    assert!(out.contains("\"seed\":5"), "{out}");
    assert!(out.contains("\"s\":2.0"));
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2);
    let out = stdout(&run(&["--config", p, "sample", "--n-samples", "4", "--seed", "6"]));
    assert!(out.contains("\"seed\":6"));
    assert_eq!(out.lines().filter(|l| !l.starts_with('#')).count(), 1 + 4);
}

#[test]
fn out_dir_receives_report() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().join("reports");
    let o = run(&["--out-dir", d.to_str().unwrap(), "sample", "--n-samples", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).is_empty());
    let text = std::fs::read_to_string(d.join("sample.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 3);
}

#[test]
fn thread_count_does_not_change_output() {
    let base = ["verify", "--kind", "linear-invariance", "--N", "3", "--n-samples", "500", "--t", "0.3"];
    let one = stdout(&run(&[&base[..], &["--threads", "1"]].concat()));
    let four = stdout(&run(&[&base[..], &["--threads", "4"]].concat()));
    assert_eq!(body_of(&one), body_of(&four));
}
