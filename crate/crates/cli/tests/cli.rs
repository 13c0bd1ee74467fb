//! End-to-end tests of the binary: exit-code contract, report shape,
//! round-trip determinism, CSV rendering.

use std::process::{Command, Output};

use serde_json::Value;

const QUINTIC: &str =
    "(1 - S)^5 - Q*(1 - q^1*S^5)*(1 - q^2*S^5)*(1 - q^3*S^5)*(1 - q^4*S^5)*(1 - q^5*S^5)";

fn qdeq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qdeq"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn polygon_reports_quintic_vertices() {
    let out = qdeq(&["--task", "polygon", "--q", "1/2", "--operator", QUINTIC]);
    let report = stdout_json(&out);
    let verts = report["outputs"]["vertices"].as_array().unwrap();
    let rendered: Vec<(i64, &str)> = verts
        .iter()
        .map(|v| (v[0].as_i64().unwrap(), v[1].as_str().unwrap()))
        .collect();
    assert_eq!(rendered, vec![(0, "1"), (20, "0"), (25, "0")]);
    let segs = report["outputs"]["segments"].as_array().unwrap();
    assert_eq!(segs[0]["slope"], "-1/20");
    assert_eq!(segs[1]["kind"], "horizontal");
}

#[test]
fn solve_coefficients_match_closed_form() {
    // frobenius at infinity for the quintic, root q^{1/5}: the reported
    // table must match the closed-form ratio products
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("solve.json");
    std::fs::write(
        &input,
        format!(
            r#"{{"task":"solve","q":"1/2","operator":"{QUINTIC}","order":10,
                "solve":{{"method":"frobenius","at_infinity":true,"root":"q^1/5"}}}}"#
        ),
    )
    .unwrap();
    let out = qdeq(&["--input", input.to_str().unwrap()]);
    let report = stdout_json(&out);
    let coeffs = report["outputs"]["series"]["coefficients"].as_array().unwrap();
    let q: f64 = 0.5;
    // closed form f_{d+1}/f_d with l = 1, m = 0
    let mut expect = 1.0f64;
    for (d, c) in coeffs.iter().take(8).enumerate() {
        let got = c["re"].as_f64().unwrap();
        assert!(
            (got - expect).abs() < 1e-10 * expect.abs().max(1.0),
            "coefficient {d}: {got} vs {expect}"
        );
        let mut ratio = 1.0f64;
        for j in 0..5 {
            let num = 1.0 - q.powf(-(d as f64) - 0.2);
            let den = 1.0 - q.powf(-((5 * d + j) as f64) - 1.0);
            ratio *= num / den;
        }
        expect *= ratio;
    }
    assert!(report["outputs"]["residual"]["relative_residual"].as_f64().unwrap() < 1e-10);
}

#[test]
fn exit_code_1_on_parse_error() {
    let out = qdeq(&["--task", "polygon", "--operator", "(1 - S"]);
    assert_eq!(out.status.code(), Some(1), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_code_2_on_numerical_failure() {
    // (1-S)^2 has a double characteristic root at 1
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("bad.json");
    std::fs::write(
        &input,
        r#"{"task":"solve","q":"1/2","operator":"(1 - S)^2","order":5,
            "solve":{"method":"frobenius","root":1.0}}"#,
    )
    .unwrap();
    let out = qdeq(&["--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_code_3_on_gate_violation() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("check.json");
    std::fs::write(
        &input,
        r#"{"task":"check","q":"1/2","check":{"suites":["theta"],"gates":{"theta":1e-30}}}"#,
    )
    .unwrap();
    let out = qdeq(&["--input", input.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    let report: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["outputs"]["all_pass"], Value::Bool(false));
}

#[test]
fn check_default_suites_pass() {
    let out = qdeq(&["--task", "check", "--q", "0.5"]);
    let report = stdout_json(&out);
    assert_eq!(report["outputs"]["all_pass"], Value::Bool(true));
    let suites = report["outputs"]["suites"].as_array().unwrap();
    assert_eq!(suites.len(), 5);
}

#[test]
fn report_inputs_rerun_bit_identical() {
    // the echoed inputs re-run to byte-identical outputs
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("solve.json");
    std::fs::write(
        &input,
        format!(
            r#"{{"task":"solve","q":"1/2","operator":"{QUINTIC}","order":9,
                "solve":{{"method":"adams","xi_index":7}}}}"#
        ),
    )
    .unwrap();
    let out1 = qdeq(&["--input", input.to_str().unwrap()]);
    let report1 = stdout_json(&out1);
    let echo = dir.path().join("echo.json");
    std::fs::write(&echo, serde_json::to_string(&report1["inputs"]).unwrap()).unwrap();
    let out2 = qdeq(&["--input", echo.to_str().unwrap()]);
    let report2 = stdout_json(&out2);
    assert_eq!(
        serde_json::to_string(&report1["outputs"]).unwrap(),
        serde_json::to_string(&report2["outputs"]).unwrap()
    );
    assert_eq!(report1["inputs"], report2["inputs"]);
}

#[test]
fn csv_table_for_solve() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("solve.json");
    std::fs::write(
        &input,
        format!(
            r#"{{"task":"solve","q":"1/2","operator":"{QUINTIC}","order":6,
                "solve":{{"method":"adams","xi_index":0}}}}"#
        ),
    )
    .unwrap();
    let out_path = dir.path().join("table.csv");
    let out = qdeq(&[
        "--input",
        input.to_str().unwrap(),
        "--format",
        "csv",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&out_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "component,exponent,re,im");
    let first = lines.next().unwrap();
    assert!(first.starts_with("f,0,1,"), "first row: {first}");
    // exponents advance on the 1/20 grid
    assert!(text.lines().nth(2).unwrap().starts_with("f,1/20,"));
}

#[test]
fn precision_env_override_recorded() {
    let out = Command::new(env!("CARGO_BIN_EXE_qdeq"))
        .args(["--task", "polygon", "--q", "0.5", "--operator", "(1 - S)^2 - Q*S"])
        .env("QDEQ_PRECISION", "64")
        .output()
        .unwrap();
    let report = stdout_json(&out);
    assert_eq!(report["metadata"]["precision_bits_requested"], 64);
    assert_eq!(report["metadata"]["precision_bits_effective"], 53);
}

#[test]
fn connect_task_reports_componentwise_residual() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("connect.json");
    std::fs::write(
        &input,
        r#"{"task":"connect","q":"1/2","order":400,
            "connect":{"alphas":["q^1/5","q^2/5","q^3/5","q^4/5"],"n":4,
                       "points":[{"re":0.2,"im":0.0}],"matrix":true}}"#,
    )
    .unwrap();
    let out = qdeq(&["--input", input.to_str().unwrap()]);
    let report = stdout_json(&out);
    let res = report["outputs"]["evaluations"][0]["residual"].as_f64().unwrap();
    assert!(res < 1e-7, "residual {res}");
    let xb_dev = report["outputs"]["matrix"]["xb_deviation"].as_f64().unwrap();
    assert!(xb_dev < 1e-8, "xb deviation {xb_dev}");
}

#[test]
fn quintic_preset_residual_via_cli() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("quintic.json");
    std::fs::write(
        &input,
        format!(
            r#"{{"task":"solve","q":"0.3","order":20,"operator":"{QUINTIC}",
                "solve":{{"method":"kgroup","preset":"quintic"}}}}"#
        ),
    )
    .unwrap();
    let out = qdeq(&["--input", input.to_str().unwrap()]);
    let report = stdout_json(&out);
    assert_eq!(report["outputs"]["n"], 5);
    let res = report["outputs"]["residual"]["relative_residual"].as_f64().unwrap();
    assert!(res < 1e-10, "residual {res}");
    assert_eq!(report["outputs"]["components"].as_array().unwrap().len(), 5);
}

#[test]
fn kgroup_and_w_explicit_solve_paths() {
    let dir = tempfile::tempdir().unwrap();
    // scalar components of the nilpotent-coefficient series (no operator:
    // the residual slot stays null)
    let kg = dir.path().join("kgroup.json");
    std::fs::write(
        &kg,
        r#"{"task":"solve","q":"1/2","order":6,
            "solve":{"method":"kgroup","n":4,"alphas":["q^1/5","q^2/5","q^3/5","q^4/5"]}}"#,
    )
    .unwrap();
    let out = qdeq(&["--input", kg.to_str().unwrap()]);
    let report = stdout_json(&out);
    let comps = report["outputs"]["components"].as_array().unwrap();
    assert_eq!(comps.len(), 4);
    // X_0 starts at 1; X_{b>0} start at 0
    assert_eq!(comps[0]["series"]["coefficients"][0]["re"], 1.0);
    assert_eq!(comps[1]["series"]["coefficients"][0]["re"], 0.0);

    // closed-form solution at infinity with its residual
    let wx = dir.path().join("w.json");
    std::fs::write(
        &wx,
        r#"{"task":"solve","q":"1/2","order":10,
            "solve":{"method":"w-explicit","n":2,"index":1,
                     "alphas":[{"re":0.8,"im":0.0},{"re":1.3,"im":0.0},{"re":0.45,"im":0.3}]}}"#,
    )
    .unwrap();
    let out = qdeq(&["--input", wx.to_str().unwrap()]);
    let report = stdout_json(&out);
    assert_eq!(report["outputs"]["character"]["re"], 1.3);
    let res = report["outputs"]["residual"]["relative_residual"].as_f64().unwrap();
    assert!(res < 1e-12, "w-solution residual {res}");
}
