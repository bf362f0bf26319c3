//! End-to-end checks of the command-line interface.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn beverage_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../models/beverage.rm")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_reactmut")).args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).to_string()
}

const FILL_SET_CM: &str = "\
input in : enum { eps, req, fill };
output out : enum { eps, coff, tea };
state wtr : int[0..2];
state mut : bool;
init out := eps; wtr := 2; mut := {false, true};
next
  out := if (in = req && wtr > 0): {coff, tea} else: eps;
  wtr := if (in = fill): (if (mut): {1, 2} else: 2) elif (in = req && wtr > 0): wtr - 1 else: wtr;
  mut := mut;
";

#[test]
fn validate_reports_nondeterminism_and_totality() {
    let model = beverage_path();
    let out = run(&["validate", model.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("deterministic: false"), "{text}");
    assert!(text.contains("total: true"), "{text}");
}

#[test]
fn broken_models_exit_with_code_one() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("broken.rm");
    std::fs::write(&path, "output o : enum { eps };\nnext o := missing;\n").unwrap();
    let out = run(&["validate", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mutants_catalogue_is_valid_jsonl() {
    let model = beverage_path();
    let out = run(&["mutants", model.to_str().unwrap()]);
    assert!(out.status.success());
    let lines: Vec<serde_json::Value> = stdout(&out)
        .lines()
        .map(|l| serde_json::from_str(l).expect("json line"))
        .collect();
    assert!(lines.len() > 20, "{}", lines.len());
    assert!(lines.iter().all(|v| v.get("id").is_some() && v.get("operator").is_some()));
    // A model with no mutable sites yields an empty catalogue and exit 0.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("plain.rm");
    std::fs::write(&path, "output o : enum { eps, a };\ninit o := a;\nnext o := o;\n").unwrap();
    let empty = run(&["mutants", path.to_str().unwrap()]);
    assert!(empty.status.success());
    assert!(stdout(&empty).trim().is_empty());
}

#[test]
fn kill_finds_the_fill_constant_mutant_definitely_killable() {
    let model = beverage_path();
    let catalogue = run(&["mutants", model.to_str().unwrap()]);
    let id = stdout(&catalogue)
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .find(|v| v["original"] == "2" && v["replacement"] == "1" && v["site"] == "next")
        .map(|v| v["id"].as_str().unwrap().to_string())
        .expect("fill mutation listed");
    let out = run(&["kill", model.to_str().unwrap(), "--mutant", &id]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("definitely-killable"), "{text}");
    assert!(text.contains("witness verified: Some(true)"), "{text}");
}

#[test]
fn score_verdicts_are_identical_across_worker_counts() {
    let model = beverage_path();
    let run_json = |workers: &str| -> serde_json::Value {
        let out = run(&[
            "score",
            model.to_str().unwrap(),
            "--workers",
            workers,
            "--format",
            "json",
        ]);
        assert!(out.status.success());
        serde_json::from_str(&stdout(&out)).expect("report json")
    };
    let one = run_json("1");
    let four = run_json("4");
    let strip = |report: &serde_json::Value| -> Vec<(String, serde_json::Value)> {
        report["per_mutant"]
            .as_array()
            .unwrap()
            .iter()
            .map(|m| {
                (
                    m["id"].as_str().unwrap().to_string(),
                    serde_json::json!({
                        "status": m["verdict"]["status"].clone(),
                        "witness": m["verdict"]["witness"].clone(),
                        "error": m["error"].clone(),
                    }),
                )
            })
            .collect()
    };
    assert_eq!(strip(&one), strip(&four));
}

#[test]
fn score_writes_report_and_suite_files() {
    let model = beverage_path();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "score",
        model.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap())
            .unwrap();
    assert!(report["aggregate"]["total_mutants"].as_u64().unwrap() > 0);
    let suite = std::fs::read_to_string(dir.path().join("testsuite.jsonl")).unwrap();
    assert!(suite.lines().count() > 0);
    for line in suite.lines() {
        let t: serde_json::Value = serde_json::from_str(line).unwrap();
        assert_eq!(
            t["inputs"].as_array().unwrap().len() + 1,
            t["outputs"].as_array().unwrap().len()
        );
    }
    assert!(dir.path().join("mutants.jsonl").exists());
}

#[test]
fn testsuite_deduplicates_tests() {
    let model = beverage_path();
    let out = run(&["testsuite", model.to_str().unwrap(), "--workers", "2"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let mut keys: Vec<(String, String)> = text
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (v["inputs"].to_string(), v["outputs"].to_string())
        })
        .collect();
    let n = keys.len();
    assert!(n > 0);
    keys.sort();
    keys.dedup();
    assert_eq!(n, keys.len(), "suite must not repeat tests");
}

#[test]
fn determinize_emits_nd_indexed_model() {
    let dir = tempfile::tempdir().unwrap();
    let cm_path = dir.path().join("fill_set.rm");
    std::fs::write(&cm_path, FILL_SET_CM).unwrap();
    let out = run(&["determinize", cm_path.to_str().unwrap()]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("nd : int[0.."), "{text}");
    assert!(text.contains("if (nd = 0): coff else: tea"), "{text}");

    let explicit = run(&[
        "determinize",
        cm_path.to_str().unwrap(),
        "--explicit",
        "--verify-depth",
        "3",
    ]);
    assert!(explicit.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&explicit)).unwrap();
    assert_eq!(json["nd_domain"], 2);
    assert_eq!(json["verify"]["deterministic_up_to_mut"], true);
    assert_eq!(json["verify"]["trace_inclusion"], true);
    assert_eq!(json["verify"]["soundness_holds"], true);
    assert!(json["transitions"].as_array().unwrap().len() > 10);
}

#[test]
fn hyper_evaluates_builtin_and_file_formulas() {
    let dir = tempfile::tempdir().unwrap();
    let cm_path = dir.path().join("fill_set.rm");
    std::fs::write(&cm_path, FILL_SET_CM).unwrap();
    // phi2 holds (potentially killable), phi3 does not (not definitely).
    let phi2 = run(&["hyper", cm_path.to_str().unwrap(), "--phi", "2", "--bound", "5"]);
    assert!(phi2.status.success());
    assert!(stdout(&phi2).contains("holds (bounded at 5): true"), "{}", stdout(&phi2));
    let phi3 = run(&["hyper", cm_path.to_str().unwrap(), "--phi", "3", "--bound", "5"]);
    assert!(stdout(&phi3).contains("holds (bounded at 5): false"), "{}", stdout(&phi3));

    let formula_path = dir.path().join("f.hl");
    std::fs::write(&formula_path, "exists p. G(mut@p)\n").unwrap();
    let file_run = run(&[
        "hyper",
        cm_path.to_str().unwrap(),
        "--formula",
        formula_path.to_str().unwrap(),
        "--bound",
        "3",
        "--format",
        "json",
    ]);
    assert!(file_run.status.success());
    let json: serde_json::Value = serde_json::from_str(&stdout(&file_run)).unwrap();
    assert_eq!(json["holds"], true);
}

#[test]
fn tiny_budgets_exit_with_code_two() {
    let model = beverage_path();
    let out = run(&["score", model.to_str().unwrap(), "--budget", "3"]);
    assert_eq!(out.status.code(), Some(2));
}
