use std::path::Path;
use std::process::{Command, Output};

fn kpplab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpplab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn unknown_key_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpplab(dir.path(), &["bbm", "--alpa", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("alpa") && stderr(&o).contains("\"schema\""), "{}", stderr(&o));

    std::fs::write(dir.path().join("c.json"), r#"{"speed": 2.5, "tolerance": 1}"#).unwrap();
    let o = kpplab(dir.path(), &["wave", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("tolerance"));
}

#[test]
fn failure_categories_map_to_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    // subcritical speed is an input error
    assert_eq!(kpplab(dir.path(), &["wave", "--speed", "1.5"]).status.code(), Some(2));
    let o = kpplab(dir.path(), &["front", "--input", "missing.csv"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("\"io\""));
    // a trace too short to fit is a numerical failure
    let o = kpplab(dir.path(), &["evolve", "--k", "1", "--t-end", "5", "--x-min", "-20", "--x-max", "40"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = kpplab(dir.path(), &["front", "--in", "trace.csv", "--window", "0.5:5"]);
    assert_eq!(o.status.code(), Some(3));
    let o = kpplab(dir.path(), &["front", "--in", "trace.csv", "--window", "0.5-5"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn wave_writes_commented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let o = kpplab(dir.path(), &["--out", "w", "wave", "--speed", "2.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("w/profile.csv")).unwrap();
    assert!(text.starts_with("# {"));
    assert!(text.contains("\"speed\": 2.5"));
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "x,U");
    let tail: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("w/tail.json")).unwrap()).unwrap();
    assert!((tail["tail"]["lambda_est"].as_f64().unwrap() - 0.5).abs() < 0.005);
    assert_eq!(tail["config"]["command"], "wave");
}

#[test]
fn bbm_then_compare() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bbm = ["bbm", "--k", "1", "--alpha", "0", "--t", "3", "--replicas", "2000", "--seed", "7"];
    assert!(kpplab(d, &[&bbm[..], &["--out", "m.csv"]].concat()).status.success());
    assert!(kpplab(d, &["--threads", "1", "--out", "m1.csv"].iter().chain(&bbm).copied().collect::<Vec<_>>()).status.success());
    assert_eq!(std::fs::read(d.join("m.csv")).unwrap(), std::fs::read(d.join("m1.csv")).unwrap());

    let evolve = [
        "evolve", "--k", "1", "--x-min", "-30", "--x-max", "50", "--t-end", "3", "--window", "\"fixed\"",
        "--out", "traj.csv",
    ];
    assert!(kpplab(d, &evolve).status.success());
    let o = kpplab(d, &["compare", "--bbm", "m.csv", "--pde", "traj.csv", "--k", "1", "--alpha", "0", "--t", "3", "--out", "ks.json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let ks: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("ks.json")).unwrap()).unwrap();
    assert!(ks["report"]["ks_distance"].as_f64().unwrap() < 0.05);
}

#[test]
fn reproduce_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    for out in ["a", "b"] {
        let o = kpplab(dir.path(), &["--out", out, "reproduce", "traveling-wave"]);
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(String::from_utf8_lossy(&o.stdout).contains("PASS"));
    }
    for f in ["result.json", "profile.csv", "tail.json"] {
        let a = std::fs::read(dir.path().join("a/traveling-wave").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b/traveling-wave").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
    assert_eq!(kpplab(dir.path(), &["reproduce", "nonsense"]).status.code(), Some(2));
}
