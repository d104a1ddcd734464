use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_admission-lab")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn grow_writes_outputs_that_replay_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "grow.json", r#"{"kind":"grow","seed":11,"rule":"majority","initial":[0.25],"accepted":20000}"#);
    let out = dir.path().join("run");
    let o = lab(&["grow", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS checkpoints_monotone"));

    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("k,steps,q_p,gap,x1,xk"));
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert!(rows.len() > 10);
    assert!(rows.iter().all(|r| r.len() == 6));
    let last: u64 = rows.last().unwrap()[0].parse().unwrap();
    assert_eq!(last, 20001);

    let summary: Value = serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["kind"], "grow");
    assert_eq!(summary["seed"], 11);
    assert_eq!(summary["config"]["accepted"], 20000);
    assert!(summary["config"].get("out").is_none());
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);

    let before = fs::read(out.join("summary.json")).unwrap();
    let o = lab(&["replay", "--config", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    for name in ["config_hash_matches", "summary_identical", "trajectory_identical"] {
        assert!(text.contains(&format!("PASS {name}")), "{text}");
    }
    assert_eq!(fs::read(out.join("summary.json")).unwrap(), before);
}

#[test]
fn seed_override_changes_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "g.json", r#"{"kind":"grow","seed":1,"rule":"majority","initial":[0.25],"accepted":500}"#);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(lab(&["grow", "--config", &cfg, "--out", a.to_str().unwrap()]).status.success());
    assert!(lab(&["grow", "--config", &cfg, "--seed", "2", "--out", b.to_str().unwrap()]).status.success());
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
    let summary: Value = serde_json::from_slice(&fs::read(b.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["seed"], 2);
}

#[test]
fn config_errors_name_the_field_and_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (r#"{"kind":"grow","seed":1,"rule":{"type":"veto","r":1.5},"initial":[1],"accepted":10}"#, "rule.r"),
        (r#"{"kind":"grow","seed":1,"rule":"majority","initial":[0.5,2],"accepted":10}"#, "initial[1]"),
        (r#"{"kind":"grow","rule":"majority","initial":[0.5],"accepted":10}"#, "seed"),
        (r#"{"kind":"oracle","seed":1,"rule":"consensus"}"#, "rule"),
    ];
    for (i, (text, path)) in cases.iter().enumerate() {
        let cfg = write(dir.path(), &format!("bad{i}.json"), text);
        let cmd = if text.contains("oracle") { "oracle" } else { "grow" };
        let o = lab(&[cmd, "--config", &cfg]);
        assert_eq!(o.status.code(), Some(2), "{text}");
        assert!(stderr(&o).contains(path), "{text}: {}", stderr(&o));
    }
    let cfg = write(dir.path(), "wrong.json", r#"{"kind":"grow","seed":1,"rule":"majority","initial":[0.5],"accepted":10}"#);
    let o = lab(&["sweep", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("kind"));
    let o = lab(&["grow", "--config", dir.path().join("missing.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn adversary_schedule_replays_through_the_committee_command() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "adv.json", r#"{"kind":"adversary","seed":3,"construction":"removal_schedule","k":2}"#);
    let out = dir.path().join("adv");
    let o = lab(&["adversary", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(stdout(&o).contains("PASS all_original_ids_removed"));

    let schedule = out.join("schedule.json");
    let parsed: Value = serde_json::from_slice(&fs::read(&schedule).unwrap()).unwrap();
    assert_eq!(parsed["kind"], "committee");
    // exact values travel as strings
    assert!(parsed["committee"]["members"].as_array().unwrap().iter().all(Value::is_string));
    let o = lab(&["committee", "--config", schedule.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS schedule_legal"));
}

#[test]
fn illegal_schedule_fails_with_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"kind":"committee","seed":1,"committee":{"members":["0","1","2","3","4"],"ell":2},
            "schedule":{"steps":[{"member_id":0,"y":"100"}]}}"#,
    );
    let o = lab(&["committee", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL schedule_legal"));
}

#[test]
fn oracle_and_sweep_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "o.json", r#"{"kind":"oracle","seed":1,"rule":{"type":"veto","r":0.25}}"#);
    let out = dir.path().join("o");
    let o = lab(&["oracle", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let table = fs::read_to_string(out.join("oracle.csv")).unwrap();
    assert_eq!(table.lines().count(), 22);

    let cfg = write(
        dir.path(),
        "s.json",
        r#"{"kind":"sweep","seed":5,"base":{"rule":"majority","initial":[0.25],"accepted":2000},
            "axis":{"name":"founder","values":[0.1,0.9]},"seed_count":3}"#,
    );
    let a = dir.path().join("s1");
    let o = lab(&["sweep", "--config", &cfg, "--out", a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let cells = fs::read_dir(a.join("cells")).unwrap().count();
    assert_eq!(cells, 6);
    let o = lab(&["replay", "--config", a.join("summary.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
}

#[test]
fn verify_subset_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "v.json", r#"{"kind":"verify","seed":1,"suite":"quick","criteria":[1,2,11]}"#);
    let o = lab(&["verify", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    let text = stdout(&o);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS criterion_")).count(), 3, "{text}");
}
