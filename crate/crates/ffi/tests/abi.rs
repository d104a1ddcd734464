use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use admission_lab_ffi::*;

fn last_error() -> String {
    let p = al_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn oracles_report_domain_errors() {
    let mut out = f64::NAN;
    unsafe {
        assert_eq!(al_f_majority(0.3, &mut out), AlStatus::Ok);
        assert!((out - (0.6 - 0.18)).abs() < 1e-15);
        assert_eq!(al_f_veto(0.4, &mut out), AlStatus::Domain);
        assert!(last_error().contains("f_veto"));
        assert_eq!(al_tau(0.75, ptr::null_mut()), AlStatus::NullPointer);
    }
}

#[test]
fn group_handle_round_trip() {
    let values = [0.7, 0.2, 0.2, 0.9];
    let mut g = ptr::null_mut();
    unsafe {
        assert_eq!(al_group_new(values.as_ptr(), values.len(), &mut g), AlStatus::Ok);
        assert_eq!(al_group_insert(g, 0.4), AlStatus::Ok);
        let mut len = 0;
        assert_eq!(al_group_len(g, &mut len), AlStatus::Ok);
        assert_eq!(len, 5);
        let mut x = 0.0;
        assert_eq!(al_group_select(g, 1, &mut x), AlStatus::Ok);
        assert_eq!(x, 0.2);
        assert_eq!(al_group_quantile(g, 0.5, &mut x), AlStatus::Ok);
        assert_eq!(x, 0.4);
        let mut n = 0;
        assert_eq!(al_group_count_interval(g, 0.2, 0.7, true, &mut n), AlStatus::Ok);
        assert_eq!(n, 4);
        assert_eq!(al_group_count_interval(g, 0.2, 0.7, false, &mut n), AlStatus::Ok);
        assert_eq!(n, 3);
        assert_eq!(al_group_select(g, 9, &mut x), AlStatus::Range);
        assert_eq!(al_group_insert(g, f64::NAN), AlStatus::Domain);
        al_group_free(g);
        al_group_free(ptr::null_mut());
        assert_eq!(al_group_len(ptr::null(), &mut len), AlStatus::NullPointer);
    }
}

#[test]
fn simulation_handle_runs_and_limits_steps() {
    let start = [0.25];
    let mut sim = ptr::null_mut();
    unsafe {
        assert_eq!(al_simulation_new(AlRule::Majority as u32, 0.0, start.as_ptr(), 1, 3, &mut sim), AlStatus::Ok);
        assert_eq!(al_simulation_run(sim, 10_000, 0), AlStatus::Ok);
        let (mut steps, mut accepted) = (0, 0);
        assert_eq!(al_simulation_counts(sim, &mut steps, &mut accepted), AlStatus::Ok);
        assert_eq!((steps, accepted), (10_000, 10_000));
        let mut q = 0.0;
        assert_eq!(al_simulation_quantile(sim, &mut q), AlStatus::Ok);
        assert!((q - 0.5).abs() < 0.2);
        al_simulation_free(sim);

        assert_eq!(al_simulation_new(AlRule::Consensus as u32, 0.0, start.as_ptr(), 1, 3, &mut sim), AlStatus::Ok);
        assert_eq!(al_simulation_run(sim, 1_000_000, 50), AlStatus::Ok);
        assert_eq!(al_simulation_counts(sim, &mut steps, ptr::null_mut()), AlStatus::Ok);
        assert_eq!(steps, 50);
        al_simulation_free(sim);

        assert_eq!(al_simulation_new(9, 0.0, start.as_ptr(), 1, 3, &mut sim), AlStatus::Domain);
        assert_eq!(al_simulation_new(AlRule::Veto as u32, 1.5, start.as_ptr(), 1, 3, &mut sim), AlStatus::Domain);
        assert_eq!(al_simulation_new(AlRule::Veto as u32, 0.25, ptr::null(), 0, 3, &mut sim), AlStatus::State);
    }
}

#[test]
fn config_runs_return_the_cli_summary() {
    let text = CString::new(r#"{"kind":"adversary","seed":1,"construction":"removal_schedule","k":1}"#).unwrap();
    let mut run = ptr::null_mut();
    unsafe {
        assert_eq!(al_run_config(text.as_ptr(), &mut run), AlStatus::Ok);
        let mut passed = false;
        assert_eq!(al_run_passed(run, &mut passed), AlStatus::Ok);
        assert!(passed);
        let mut json = ptr::null_mut();
        assert_eq!(al_run_summary_json(run, &mut json), AlStatus::Ok);
        let summary: serde_json::Value = serde_json::from_str(CStr::from_ptr(json).to_str().unwrap()).unwrap();
        assert_eq!(summary["config"]["construction"], "removal_schedule");
        assert_eq!(summary["passed"], true);
        al_string_free(json);
        al_run_free(run);

        let bad = CString::new(r#"{"kind":"grow","seed":1,"rule":{"type":"veto","r":3},"initial":[1],"accepted":5}"#).unwrap();
        assert_eq!(al_run_config(bad.as_ptr(), &mut run), AlStatus::Config);
        assert!(last_error().contains("rule.r"));
        let invalid = [0xffu8, 0];
        assert_eq!(al_run_config(invalid.as_ptr().cast(), &mut run), AlStatus::InvalidUtf8);
    }
}

/// Compiles the C smoke test against the header and the static library.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(|d| d.parent()).unwrap();
    let lib = profile_dir.join("libadmission_lab_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let dir = tempfile_dir();
    let bin = dir.join("smoke");
    let status = Command::new("cc")
        .args(["-std=c99", "-Wall", "-Werror", "-I"])
        .arg(manifest.join("include"))
        .arg(manifest.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("admission-lab-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
