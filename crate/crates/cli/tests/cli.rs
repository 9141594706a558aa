use std::path::Path;
use std::process::{Command, Output};

fn nfhrtf(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nfhrtf"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn files_under(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

const QUICK: &[&str] = &["--dwell-ms", "40", "--jitter-std-deg", "1"];

#[test]
fn run_all_writes_artifacts_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let mut args = vec!["run-all", "--seed", "42", "--distance", "0.4", "--out", name];
        args.extend_from_slice(QUICK);
        let o = nfhrtf(&args, tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = String::from_utf8(o.stdout).unwrap();
        for key in ["max SD", "min CC", "max |ITD error|"] {
            assert!(text.contains(key), "summary lacks {key}: {text}");
        }
        outputs.push(files_under(&tmp.path().join(name)));
    }
    let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
    for expected in ["ref.json", "est.json", "report.csv", "report_bands.csv", "truth.json"] {
        assert!(names.contains(&expected), "{names:?}");
    }
    assert!(names.iter().any(|n| n.starts_with("session")));
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn usage_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let o = nfhrtf(&["run-all", "--no-such-flag"], tmp.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    for args in [&["frobnicate"][..], &[], &["acquire"], &["run-all", "--seed", "x"], &["evaluate", "--est", "e.json"]] {
        let o = nfhrtf(args, tmp.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}: {}", stderr(&o));
    }
    let help = nfhrtf(&["--help"], tmp.path());
    assert_eq!(help.status.code(), Some(0));
}

#[test]
fn mismatched_grids_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    for (step, out) in [("5", "five.json"), ("10", "ten.json")] {
        let o = nfhrtf(&["synth", "--step-deg", step, "--out", out], tmp.path());
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    }
    let o = nfhrtf(&["evaluate", "--ref", "five.json", "--est", "ten.json"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid"), "{}", stderr(&o));
}

#[test]
fn bad_data_and_config_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    std::fs::write(tmp.path().join("typo.toml"), "[nlms]\nmu_mxa = 1.0\n").unwrap();
    let o = nfhrtf(&["synth", "--config", "typo.toml"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("mu_mxa"), "{}", stderr(&o));
    let o = nfhrtf(&["synth", "--distance", "0.05"], tmp.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    let o = nfhrtf(&["estimate", "--session", "nowhere"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("trajectory.json"), "{}", stderr(&o));
}

#[test]
fn subcommands_compose() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |args: &[&str]| {
        let o = nfhrtf(args, tmp.path());
        assert_eq!(o.status.code(), Some(0), "{args:?}: {}", stderr(&o));
    };
    std::fs::write(tmp.path().join("cfg.json"), r#"{"session": {"dwell_ms": 30.0, "snr_db": "inf"}}"#).unwrap();
    run(&["synth", "--step-deg", "1", "--out", "truth.json"]);
    run(&["synth", "--out", "ref.json"]);
    run(&["acquire", "--config", "cfg.json", "--truth", "truth.json", "--out", "sess"]);
    run(&["estimate", "--session", "sess", "--out", "est.json"]);
    run(&["evaluate", "--ref", "ref.json", "--est", "est.json", "--out", "rep.csv"]);
    let report = std::fs::read_to_string(tmp.path().join("rep.csv")).unwrap();
    assert_eq!(report.lines().count(), 73);
    assert!(tmp.path().join("rep_bands.csv").exists());

    run(&["evaluate", "--config", "cfg.json", "--repeat", "3", "--snr-db", "30", "--out", "rep3.csv"]);
    let repeat = std::fs::read_to_string(tmp.path().join("rep3.csv")).unwrap();
    let mut lines = repeat.lines();
    let header = lines.next().unwrap();
    assert!(header.contains("cc_left_mean") && header.contains("cc_left_std"), "{header}");
    assert_eq!(lines.count(), 72);
}
