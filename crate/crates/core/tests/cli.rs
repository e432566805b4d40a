mod common;

use std::process::Command;

use common::fixture;

fn cqgen() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cqgen"))
}

#[test]
fn scripted_run_writes_submission_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out.json");
    let log = dir.path().join("run.jsonl");
    let status = cqgen()
        .args(["run", "--backend", "scripted", "--parallelism", "4"])
        .arg("--dataset")
        .arg(fixture("five_interventions.json"))
        .arg("--script")
        .arg(fixture("five_script.jsonl"))
        .arg("--out")
        .arg(&out)
        .arg("--log")
        .arg(&log)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let submission: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(submission.as_object().unwrap().len(), 5);
    assert_eq!(submission["D4"]["cqs"].as_array().unwrap().len(), 3);
    assert!(std::fs::read_to_string(&log).unwrap().lines().count() > 5);
}

#[test]
fn failures_exit_with_one_and_bad_config_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let script = dir.path().join("empty.jsonl");
    std::fs::write(&script, "").unwrap();
    let partial = cqgen()
        .args(["run", "--backend", "scripted"])
        .arg("--dataset")
        .arg(fixture("five_interventions.json"))
        .arg("--script")
        .arg(&script)
        .arg("--out")
        .arg(dir.path().join("out.json"))
        .status()
        .unwrap();
    assert_eq!(partial.code(), Some(1));

    let bad_profile = cqgen()
        .args(["run", "--backend", "scripted", "--profile", "nope"])
        .arg("--dataset")
        .arg(fixture("five_interventions.json"))
        .arg("--script")
        .arg(&script)
        .arg("--out")
        .arg(dir.path().join("out2.json"))
        .output()
        .unwrap();
    assert_eq!(bad_profile.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_profile.stderr).contains("nope"));

    let baseline_without_prompt = cqgen()
        .args(["run", "--backend", "scripted", "--profile", "baseline"])
        .arg("--dataset")
        .arg(fixture("five_interventions.json"))
        .arg("--script")
        .arg(&script)
        .arg("--out")
        .arg(dir.path().join("out3.json"))
        .status()
        .unwrap();
    assert_eq!(baseline_without_prompt.code(), Some(2));
}

#[test]
fn validate_catalog_lists_schemes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("schemes.json");
    std::fs::write(&path, cqgen::catalog::BUILTIN_CATALOG).unwrap();
    let output = cqgen().arg("validate-catalog").arg(&path).output().unwrap();
    assert!(output.status.success());
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.contains("26 schemes"));
    assert!(stdout.contains("ExpertOpinion (5 CQs)"));
    assert!(stdout.contains("Alternatives (no CQs)"));

    std::fs::write(&path, "[{\"name\": \"Broken\"").unwrap();
    let output = cqgen().arg("validate-catalog").arg(&path).output().unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn report_renders_csv_in_requested_order() {
    let dir = tempfile::tempdir().unwrap();
    let labels = dir.path().join("labels.jsonl");
    let mut text = String::new();
    for (run, label) in [
        ("b", "Useful"),
        ("a", "Invalid"),
        ("a", "Useful"),
        ("b", "not_able_to_evaluate"),
    ] {
        text.push_str(&format!(
            "{{\"intervention_id\": \"x\", \"cq\": \"q\", \"label\": \"{label}\", \"run\": \"{run}\"}}\n"
        ));
    }
    std::fs::write(&labels, text).unwrap();
    let output = cqgen()
        .args(["report", "--format", "csv", "--order", "a,b", "--labels"])
        .arg(&labels)
        .output()
        .unwrap();
    assert!(output.status.success());
    assert_eq!(
        String::from_utf8(output.stdout).unwrap(),
        "run,Useful,Unhelpful,Invalid,N/A\na,50.00,0.00,50.00,0.00\nb,50.00,0.00,0.00,50.00\n"
    );
}
