use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use anicurate::stages::ConditionMeta;
use anicurate_core::conditioning::ConditionBundle;
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_anicurate");

fn anicurate(args: &[&str], envs: &[(&str, &str)]) -> Output {
    Command::new(BIN)
        .args(args)
        .env("RUST_LOG", "warn")
        .env_remove("ANICURATE_PROVIDER_CAPTION")
        .envs(envs.iter().copied())
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = anicurate(args, &[]);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn error_json(out: &Output) -> Value {
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    serde_json::from_str(stderr.lines().last().unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Synthesized corpus plus a config file listing it as inputs.
fn corpus(dir: &Path, count: usize) -> PathBuf {
    let listed = ok(&["--out", p(dir), "synth", "corpus", "--count", &count.to_string()]);
    let inputs: Vec<String> = listed.lines().map(|l| format!("{l:?}")).collect();
    let config = dir.join("pipeline.toml");
    std::fs::write(&config, format!("seed = 3\ninputs = [{}]\n", inputs.join(", "))).unwrap();
    config
}

#[test]
fn errors_are_json_on_stderr_with_exit_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = anicurate(&["--out", p(dir.path()), "score"], &[]);
    let json = error_json(&out);
    assert_eq!(json["error"]["stage"], "score");
    assert_eq!(json["error"]["kind"], "io");

    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "wrokers = 2\n").unwrap();
    let json = error_json(&anicurate(&["--config", p(&bad), "histogram"], &[]));
    assert_eq!(json["error"]["kind"], "config");
    assert!(json["error"]["message"].as_str().unwrap().contains("wrokers"));

    let junk = dir.path().join("junk.y4m");
    std::fs::write(&junk, b"not a video").unwrap();
    let json = error_json(&anicurate(&["--out", p(dir.path()), "scenes", p(&junk)], &[]));
    assert_eq!(json["error"]["kind"], "input");
    assert!(json["error"]["message"].as_str().unwrap().contains("junk.y4m"));
}

#[test]
fn full_run_is_reproducible_and_seed_sensitive() {
    let dir = tempfile::tempdir().unwrap();
    let config = corpus(dir.path(), 6);
    let runs: Vec<PathBuf> = ["a", "b"].iter().map(|r| dir.path().join(r)).collect();
    for out in &runs {
        ok(&["--config", p(&config), "--out", p(out), "run"]);
    }
    for file in ["clips.jsonl", "scores.jsonl", "verdicts.jsonl", "manifest.jsonl", "condition/index.jsonl"] {
        let a = std::fs::read(runs[0].join(file)).unwrap();
        assert_eq!(a, std::fs::read(runs[1].join(file)).unwrap(), "{file}");
    }
    let index = std::fs::read_to_string(runs[0].join("condition/index.jsonl")).unwrap();
    let first: ConditionMeta = serde_json::from_str(index.lines().next().expect("some clip passes")).unwrap();
    let bytes = |run: &Path| std::fs::read(run.join("condition").join(format!("{}.f32", first.id))).unwrap();
    assert_eq!(bytes(&runs[0]), bytes(&runs[1]));

    let other = dir.path().join("c");
    ok(&["--config", p(&config), "--out", p(&other), "--seed", "4", "run"]);
    assert_ne!(bytes(&runs[0]), bytes(&other));
}

#[test]
fn condition_writes_tensor_files_matching_their_sidecars() {
    let dir = tempfile::tempdir().unwrap();
    let config = corpus(dir.path(), 4);
    let out = dir.path().join("out");
    for stage in ["scenes", "score", "filter", "manifest"] {
        ok(&["--config", p(&config), "--out", p(&out), stage]);
    }
    for mode in ["keyframe", "motion_area"] {
        ok(&["--config", p(&config), "--out", p(&out), "condition", "--mode", mode]);
        let index = std::fs::read_to_string(out.join("condition/index.jsonl")).unwrap();
        assert!(!index.is_empty());
        for line in index.lines() {
            let meta: ConditionMeta = serde_json::from_str(line).unwrap();
            let cond = out.join("condition");
            let bytes = std::fs::read(cond.join(format!("{}.f32", meta.id))).unwrap();
            let bundle = ConditionBundle::from_f32_le(&bytes, &meta.input).unwrap();
            let s = &meta.input;
            assert_eq!(s.channels, 16 + 1 + 16 + 8);
            assert_eq!(bytes.len(), 4 * s.width * s.height * s.frames * s.channels);
            assert_eq!(s.frames * 4, meta.frames_used);
            let target = std::fs::read(cond.join(&meta.target_file)).unwrap();
            assert_eq!(target.len(), 4 * s.width * s.height * s.frames * 16);
            assert!((1..=1000).contains(&meta.timestep));
            let mask = bundle.mask();
            if mode == "motion_area" {
                assert_eq!(meta.guide_positions, vec![0]);
            } else {
                assert!(!meta.guide_positions.is_empty());
                for j in 0..s.frames {
                    let frame = mask.frame(j);
                    if meta.guide_positions.contains(&j) {
                        assert_eq!(frame.count_ones(), s.width * s.height);
                    } else {
                        assert!(frame.is_empty());
                    }
                }
            }
        }
    }
}

#[test]
fn provider_endpoint_env_override_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let config = corpus(dir.path(), 3);
    let out = dir.path().join("out");
    for stage in ["scenes", "score", "filter"] {
        ok(&["--config", p(&config), "--out", p(&out), stage]);
    }
    let broken = anicurate(
        &["--config", p(&config), "--out", p(&out), "manifest"],
        &[("ANICURATE_PROVIDER_CAPTION", "tcp://127.0.0.1:1")],
    );
    let json = error_json(&broken);
    assert_eq!(json["error"]["kind"], "provider");
    assert_eq!(json["error"]["class"], "transport");

    let served = format!("cmd:{BIN} providers serve");
    let out2 = anicurate(
        &["--config", p(&config), "--out", p(&out), "manifest"],
        &[("ANICURATE_PROVIDER_CAPTION", &served)],
    );
    assert!(out2.status.success(), "{}", String::from_utf8_lossy(&out2.stderr));
    let remote = std::fs::read(out.join("manifest.jsonl")).unwrap();
    ok(&["--config", p(&config), "--out", p(&out), "manifest"]);
    assert_eq!(remote, std::fs::read(out.join("manifest.jsonl")).unwrap());
}

#[test]
fn evaluate_then_report_on_a_synthetic_benchmark() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    let bench = ok(&["--out", p(out), "synth", "benchmark", "--entries", "4"]);
    let bench = PathBuf::from(bench.trim());
    let generated = out.join("bench/generated");
    let a = out.join("a.jsonl");
    let b = out.join("b.jsonl");
    ok(&["--out", p(out), "evaluate", "--benchmark", p(&bench), "--generated", p(&generated), "--model", "copy", "--output", p(&a)]);
    std::fs::remove_file(generated.join("entry-0001.y4m")).unwrap();
    ok(&["--out", p(out), "--workers", "3", "evaluate", "--benchmark", p(&bench), "--generated", p(&generated), "--model", "gappy", "--output", p(&b)]);

    let gappy: Vec<Value> = std::fs::read_to_string(&b)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(gappy.len(), 4);
    assert_eq!(gappy[1]["metrics"]["motion"]["status"], "failed");
    assert_eq!(gappy[0]["metrics"]["character"]["status"], "ok");

    let table = ok(&["--out", p(out), "report", "--samples", p(&a), "--samples", p(&b)]);
    assert!(table.contains("| copy |") && table.contains("| gappy |"), "{table}");
    let csv = ok(&["--out", p(out), "report", "--samples", p(&a), "--format", "csv"]);
    assert!(csv.lines().count() >= 2);
    assert!(out.join("report.csv").is_file() && out.join("report.md").is_file());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(report["alignment"].is_null());
}

#[test]
fn histogram_and_calibration_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = corpus(dir.path(), 4);
    let out = dir.path().join("out");
    for stage in ["scenes", "score"] {
        ok(&["--config", p(&config), "--out", p(&out), stage]);
    }
    ok(&["--config", p(&config), "--out", p(&out), "histogram", "--bins", "5"]);
    let csv = std::fs::read_to_string(out.join("histogram.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("dimension,bin_lo,bin_hi,count"));
    assert_eq!(csv.lines().count(), 1 + 4 * 5);

    let few = anicurate(&["--config", p(&config), "--out", p(&out), "calibrate", "--target", "0.5"], &[]);
    assert_eq!(error_json(&few)["error"]["kind"], "curation");
    ok(&["--config", p(&config), "--out", p(&out), "calibrate", "--target", "0.5", "--synthetic", "2000"]);
    let cal: Value = serde_json::from_str(&std::fs::read_to_string(out.join("calibration.json")).unwrap()).unwrap();
    assert!(cal["achieved"].as_f64().unwrap() > 0.0);
    ok(&["--config", p(&config), "--out", p(&out), "filter"]);
    assert!(out.join("verdicts.jsonl").is_file());
}
