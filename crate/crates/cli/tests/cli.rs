use std::path::PathBuf;

use assert_cmd::Command;
use jsonschema::JSONSchema;
use serde_json::Value;

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn fixture(name: &str) -> String {
    root().join("figures").join(name).display().to_string()
}

fn lcbirk(args: &[&str]) -> std::process::Output {
    Command::cargo_bin("lcbirk")
        .unwrap()
        .args(args)
        .output()
        .unwrap()
}

fn stdout(args: &[&str]) -> String {
    let out = lcbirk(args);
    assert!(
        out.status.success(),
        "{:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn validate(cmd: &str, doc: &str) {
    let path = root()
        .join("schema")
        .join(format!("{}.v1.schema.json", cmd));
    let schema: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    let compiled = JSONSchema::compile(&schema).unwrap();
    let instance: Value = serde_json::from_str(doc).unwrap();
    if let Err(errors) = compiled.validate(&instance) {
        let msgs: Vec<String> = errors
            .map(|e| format!("{} at {}", e, e.instance_path))
            .collect();
        panic!("{} output violates schema:\n{}", cmd, msgs.join("\n"));
    };
}

#[test]
fn analyze_fig1_reports_capacitor_loop() {
    let out = stdout(&["analyze", &fixture("fig1.net")]);
    assert!(
        out.contains("never regular: capacitor loop {I1}"),
        "{}",
        out
    );
    assert!(out.contains("conservative: Yes"), "{}", out);
}

#[test]
fn analyze_fig1_matrices() {
    let doc: Value = serde_json::from_str(&stdout(&[
        "analyze",
        &fixture("fig1.net"),
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(doc["branches"].as_array().unwrap().len(), 7);
    assert_eq!(doc["incidence_rank"], 3);
    assert_eq!(doc["loop_rank"], 4);
    assert_eq!(doc["tellegen"], true);
    assert_eq!(
        doc["classification"]["capacitor_only_loops"],
        serde_json::json!(["I1"])
    );
    assert_eq!(
        doc["classification"]["inductor_only_loops"],
        serde_json::json!(["I3"])
    );
    assert_eq!(doc["regularity"]["verdict"], "StructurallyNever");
}

#[test]
fn analyze_json_matches_schema() {
    for f in [
        "fig1.net",
        "fig1_nonlinear.net",
        "fig2.net",
        "fig2_swapped.net",
        "osc.net",
        "duffing.net",
    ] {
        validate(
            "analyze",
            &stdout(&["analyze", &fixture(f), "--format", "json"]),
        );
    }
    validate(
        "analyze",
        &stdout(&[
            "analyze",
            &fixture("fig1.net"),
            "--raw-at",
            "--format",
            "json",
        ]),
    );
}

#[test]
fn reduce_json_matches_schema() {
    validate(
        "reduce",
        &stdout(&["reduce", &fixture("fig1.net"), "--format", "json"]),
    );
    validate(
        "reduce",
        &stdout(&[
            "reduce",
            &fixture("fig1.net"),
            "--reduce-inductor-loops",
            "--format",
            "json",
        ]),
    );
    validate(
        "reduce",
        &stdout(&["reduce", &fixture("fig1_nonlinear.net"), "--format", "json"]),
    );
}

#[test]
fn reduce_fig1_removes_both_loops() {
    let doc: Value = serde_json::from_str(&stdout(&[
        "reduce",
        &fixture("fig1.net"),
        "--reduce-inductor-loops",
        "--format",
        "json",
    ]))
    .unwrap();
    assert_eq!(doc["dof_before"], 4);
    assert_eq!(doc["dof"], 2);
    assert_eq!(doc["regularity"]["verdict"], "Yes");
    assert!(doc["eliminated"][0]["method"]["LinearPivot"].is_object());
    assert!(doc["eliminated"][1]["method"]["IntegratedConstraint"].is_object());
}

#[test]
fn simulate_json_matches_schema() {
    validate(
        "simulate",
        &stdout(&[
            "simulate",
            &fixture("fig1.net"),
            "--t1",
            "1",
            "--format",
            "json",
            "--record-every",
            "50",
        ]),
    );
    validate(
        "simulate",
        &stdout(&[
            "simulate",
            &fixture("fig2.net"),
            "--t1",
            "1",
            "--dt",
            "1e-2",
            "--format",
            "json",
        ]),
    );
}

#[test]
fn simulate_oscillator_follows_cosine() {
    let out = stdout(&[
        "simulate",
        &fixture("osc.net"),
        "--t1",
        "62.83",
        "--dt",
        "1e-3",
        "--record-every",
        "1000",
    ]);
    let mut lines = out.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(&head[..5], &["t", "q1", "qd1", "E", "balance_residual"]);
    let last: Vec<f64> = lines
        .last()
        .unwrap()
        .split(',')
        .map(|s| s.parse().unwrap())
        .collect();
    assert!((last[0] - 62.83).abs() < 1e-9, "{}", last[0]);
    assert!(
        (last[1] - 62.83f64.cos()).abs() < 1e-8,
        "{} vs {}",
        last[1],
        62.83f64.cos()
    );
}

#[test]
fn simulate_without_energy_leaves_columns_empty() {
    let out = stdout(&[
        "simulate",
        &fixture("fig2.net"),
        "--t1",
        "0.1",
        "--dt",
        "1e-2",
    ]);
    let row: Vec<&str> = out.lines().nth(1).unwrap().split(',').collect();
    let head: Vec<&str> = out.lines().next().unwrap().split(',').collect();
    let e = head.iter().position(|h| *h == "E").unwrap();
    assert_eq!(row[e], "");
    assert_eq!(row[e + 1], "");
}

#[test]
fn verify_fig2_is_not_conservative() {
    let out = lcbirk(&["verify", &fixture("fig2.net"), "--t1", "2"]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("conservative: No ("), "{}", text);
}

#[test]
fn verify_json_matches_schema() {
    for f in ["osc.net", "fig1.net", "fig2_swapped.net"] {
        let doc = stdout(&["verify", &fixture(f), "--format", "json"]);
        validate("verify", &doc);
        let v: Value = serde_json::from_str(&doc).unwrap();
        assert_eq!(v["conservative"], "Yes", "{}", f);
        for p in v["properties"].as_array().unwrap() {
            assert_ne!(p["status"], "fail", "{}: {}", f, p);
        }
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cases: [&[&str]; 4] = [
        &[
            "analyze",
            "fig1_nonlinear.net",
            "--format",
            "json",
            "--seed",
            "7",
        ],
        &[
            "reduce",
            "fig1_nonlinear.net",
            "--format",
            "json",
            "--seed",
            "7",
        ],
        &["simulate", "duffing.net", "--t1", "2", "--seed", "7"],
        &[
            "verify", "fig2.net", "--t1", "2", "--format", "json", "--seed", "7",
        ],
    ];
    for case in cases {
        let mut args: Vec<String> = case.iter().map(|s| s.to_string()).collect();
        args[1] = fixture(case[1]);
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        let a = lcbirk(&args);
        let b = lcbirk(&args);
        assert!(a.status.success());
        assert_eq!(a.stdout, b.stdout, "{:?}", case);
    }
}

#[test]
fn exit_codes() {
    assert_eq!(
        lcbirk(&["analyze", "/nonexistent/x.net"]).status.code(),
        Some(2)
    );
    assert_eq!(lcbirk(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        lcbirk(&["analyze", &fixture("fig1.net"), "--coords", "Z9"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        lcbirk(&["analyze", &fixture("fig1.net"), "--format", "csv"])
            .status
            .code(),
        Some(2)
    );

    let dir = std::env::temp_dir().join(format!("lcbirk-exit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    let bad = dir.join("bad.net");
    std::fs::write(&bad, "branch X1 a b Q 1\n").unwrap();
    let out = lcbirk(&["analyze", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.net:1:"), "{}", err);
    std::fs::remove_dir_all(&dir).unwrap();
}
