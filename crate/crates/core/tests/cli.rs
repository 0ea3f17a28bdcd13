mod common;

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sanction-feedback"))
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn canonical_file(dir: &TempDir) -> PathBuf {
    write(dir, "canonical.json", common::CANONICAL_JSON)
}

fn with_change(dir: &TempDir, name: &str, edit: impl FnOnce(&mut Value)) -> PathBuf {
    let mut v: Value = serde_json::from_str(common::CANONICAL_JSON).unwrap();
    edit(&mut v);
    write(dir, name, &v.to_string())
}

fn run(config: &Path, args: &[&str]) -> Output {
    bin()
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout)
        .unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn beliefs_canonical() {
    let dir = TempDir::new().unwrap();
    let out = run(&canonical_file(&dir), &["beliefs", "--buyer", "1"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["g_hh"].as_f64().unwrap() - 0.8068657).abs() < 1e-6);
    assert!((v["g_hl"].as_f64().unwrap() - 0.7922449).abs() < 1e-6);
    assert!(String::from_utf8_lossy(&out.stdout).contains("\"g_hh\": 0.8068656716"));
}

#[test]
fn malformed_json_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = write(&dir, "bad.json", "{ not json");
    assert_eq!(run(&p, &["beliefs"]).status.code(), Some(3));
}

#[test]
fn missing_file_exits_3() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("absent.json");
    assert_eq!(run(&p, &["solve"]).status.code(), Some(3));
}

#[test]
fn decreasing_signal_model_exits_2_with_reason() {
    let dir = TempDir::new().unwrap();
    let p = with_change(&dir, "nm.json", |v| {
        v["signal_model"]["f_high"] = serde_json::json!([0.9, 0.3])
    });
    let out = run(&p, &["beliefs"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NON_MONOTONE_F"));
}

#[test]
fn unknown_field_exits_2() {
    let dir = TempDir::new().unwrap();
    let p = with_change(&dir, "extra.json", |v| v["econ"]["bonus"] = 1.into());
    assert_eq!(run(&p, &["solve"]).status.code(), Some(2));
}

#[test]
fn missing_config_flag_exits_2() {
    assert_eq!(bin().arg("solve").output().unwrap().status.code(), Some(2));
}

#[test]
fn solve_canonical() {
    let dir = TempDir::new().unwrap();
    let out = run(&canonical_file(&dir), &["solve"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let buyers = v["buyers"].as_array().unwrap();
    assert_eq!(buyers.len(), 2);
    for b in buyers {
        assert!((b["scheme"]["budget"].as_f64().unwrap() - 0.2224101).abs() < 1e-6);
        assert_eq!(b["feasibility"]["reason"], "OK");
    }
    // Symmetric strategies give identical schemes.
    assert_eq!(buyers[0]["scheme"]["tau"], buyers[1]["scheme"]["tau"]);
    assert!((v["total_budget"].as_f64().unwrap() - 2.0 * 0.2224101).abs() < 1e-6);
}

#[test]
fn solve_commitment_certain_exits_4() {
    let dir = TempDir::new().unwrap();
    let p = with_change(&dir, "p1.json", |v| {
        v["seller"]["commitment_prior"] = 1.0.into()
    });
    let out = run(&p, &["solve"]);
    assert_eq!(out.status.code(), Some(4));
    let v = stdout_json(&out);
    assert_eq!(v["feasibility"][0]["reason"], "PRIOR_DEGENERATE");
}

#[test]
fn solve_text_output() {
    let dir = TempDir::new().unwrap();
    let out = run(&canonical_file(&dir), &["solve", "--output", "text"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("total budget 0.444820"));
}

#[test]
fn verify_lp_and_constructive() {
    let dir = TempDir::new().unwrap();
    let cfg = canonical_file(&dir);
    for scheme in ["lp", "constructive"] {
        let out = run(&cfg, &["verify", "--scheme", scheme]);
        assert_eq!(out.status.code(), Some(0));
        assert_eq!(stdout_json(&out)["report"]["overall_pass"], true);
    }
}

#[test]
fn verify_supplied_payments() {
    let dir = TempDir::new().unwrap();
    let cfg = canonical_file(&dir);
    let zero = write(
        &dir,
        "zero.json",
        r#"{"buyer1": [[0,0],[0,0]], "buyer2": [[0,0],[0,0]]}"#,
    );
    let out = run(&cfg, &["verify", "--tau", zero.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["report"]["overall_pass"], false);
    assert_eq!(
        v["report"]["certificates"][0]["honest_is_strict_best"],
        false
    );
}

#[test]
fn sweep_prior_endpoints_infeasible() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &canonical_file(&dir),
        &[
            "sweep",
            "--param",
            "commitment_prior",
            "--from",
            "0",
            "--to",
            "1",
            "--steps",
            "11",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    assert_eq!(
        reader.headers().unwrap().iter().collect::<Vec<_>>(),
        [
            "value",
            "feasible",
            "budget_buyer1",
            "budget_buyer2",
            "g_gap"
        ]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 11);
    for (k, row) in rows.iter().enumerate() {
        let feasible = k != 0 && k != 10;
        assert_eq!(&row[1], if feasible { "true" } else { "false" }, "row {k}");
        assert_eq!(row[2].is_empty(), !feasible);
        assert_eq!(row[3].is_empty(), !feasible);
    }
}

#[test]
fn sweep_two_steps_two_rows() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &canonical_file(&dir),
        &[
            "sweep", "--param", "epsilon", "--from", "0.01", "--to", "0.1", "--steps", "2",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let rows = csv::Reader::from_reader(out.stdout.as_slice())
        .records()
        .count();
    assert_eq!(rows, 2);
}

#[test]
fn sweep_invalid_grid_point_exits_2() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &canonical_file(&dir),
        &[
            "sweep", "--param", "epsilon", "--from", "-0.1", "--to", "0.1", "--steps", "3",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("NONPOSITIVE_EPSILON"));
}

#[test]
fn sweep_one_step_is_usage_error() {
    let dir = TempDir::new().unwrap();
    let out = run(
        &canonical_file(&dir),
        &[
            "sweep", "--param", "epsilon", "--from", "0.01", "--to", "0.1", "--steps", "1",
        ],
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulate_is_deterministic() {
    let dir = TempDir::new().unwrap();
    let cfg = canonical_file(&dir);
    let args = ["simulate", "--games", "60", "--seed", "42"];
    let a = run(&cfg, &args);
    let b = run(&cfg, &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = run(&cfg, &["simulate", "--games", "60", "--seed", "43"]);
    assert_ne!(a.stdout, c.stdout);

    let text = String::from_utf8(a.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 61);
    for (k, line) in lines[..60].iter().enumerate() {
        let v: Value = serde_json::from_str(line).unwrap();
        assert_eq!(v["game"], k + 1);
    }
    let summary: Value = serde_json::from_str(lines[60]).unwrap();
    assert_eq!(summary["summary"]["games"], 60);
}

#[test]
fn simulate_saturated_belief_exits_4_when_resolving() {
    // A commitment seller drives the prior toward 1 until no scheme can
    // separate the signals; freezing the first game's payments avoids this.
    let dir = TempDir::new().unwrap();
    let cfg = canonical_file(&dir);
    let base = [
        "simulate",
        "--games",
        "2000",
        "--seed",
        "42",
        "--type",
        "fixed-commitment",
        "--quiet",
    ];
    let out = run(&cfg, &base);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(
        stdout_json(&out)["feasibility"][0]["reason"],
        "G_GAP_BELOW_TOLERANCE"
    );
    let frozen = run(&cfg, &[&base[..], &["--payments", "freeze"]].concat());
    assert_eq!(frozen.status.code(), Some(0));
}

#[test]
fn simulate_zero_games_is_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(
        run(&canonical_file(&dir), &["simulate", "--games", "0"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn simulate_trace_file_and_quiet() {
    let dir = TempDir::new().unwrap();
    let cfg = canonical_file(&dir);
    let trace = dir.path().join("trace.jsonl");
    let out = run(
        &cfg,
        &[
            "simulate",
            "--games",
            "25",
            "--seed",
            "1",
            "--trace",
            trace.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(String::from_utf8(out.stdout).unwrap().lines().count(), 1);
    assert_eq!(std::fs::read_to_string(&trace).unwrap().lines().count(), 25);

    let quiet = run(
        &cfg,
        &["simulate", "--games", "25", "--seed", "1", "--quiet"],
    );
    assert_eq!(String::from_utf8(quiet.stdout).unwrap().lines().count(), 1);
}

#[test]
fn simulate_fixed_commitment_high_signal_rate() {
    let dir = TempDir::new().unwrap();
    let games = 100_000;
    let out = run(
        &canonical_file(&dir),
        &[
            "simulate",
            "--games",
            &games.to_string(),
            "--seed",
            "42",
            "--type",
            "fixed-commitment",
            "--payments",
            "freeze",
            "--quiet",
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let rate = v["summary"]["high_signal_rate_overall"].as_f64().unwrap();
    let sigma = (0.9 * 0.1 / (2.0 * games as f64)).sqrt();
    assert!((rate - 0.9).abs() < 3.0 * sigma, "rate {rate}");
    assert_eq!(v["summary"]["seller_type"], "commitment");
}
