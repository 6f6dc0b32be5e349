//! End-to-end CLI tests: the pipeline, the exit-code contract, and the
//! golden SVG plot.

use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_contraction-lab"))
}

fn run_ok(args: &[&str]) -> Output {
    let out = bin().args(args).output().expect("binary runs");
    assert!(
        out.status.success(),
        "command {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn exit_code(args: &[&str]) -> i32 {
    bin()
        .args(args)
        .output()
        .expect("binary runs")
        .status
        .code()
        .expect("no signal")
}

#[test]
fn gen_run_verify_plot_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("chain.json");
    let trace = dir.path().join("trace.csv");
    let verdict = dir.path().join("verdict.json");
    let svg = dir.path().join("plot.svg");

    run_ok(&[
        "gen",
        "--kind",
        "gap",
        "--dim",
        "4",
        "--len",
        "64",
        "--seed",
        "7",
        "--delta",
        "0.3",
        "--out",
        chain.to_str().unwrap(),
    ]);

    let out = run_ok(&[
        "run",
        "--chain",
        chain.to_str().unwrap(),
        "--sigma",
        "blocks:2",
        "--xi",
        "random:3",
        "--steps",
        "5000",
        "--k",
        "2",
        "--out",
        trace.to_str().unwrap(),
        "--verdict",
        verdict.to_str().unwrap(),
    ]);
    let stdout = String::from_utf8(out.stdout).unwrap();
    let parsed: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(parsed["converged"], serde_json::json!(true));
    assert!(verdict.exists());

    let csv = std::fs::read_to_string(&trace).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "step,sigma_index,xi_norm,dist_to_P,adjoint_dist,f_functional"
    );
    let first = lines.next().unwrap();
    // 17 significant digits: mantissa d.dddddddddddddddd followed by an exponent.
    let xi_norm_field = first.split(',').nth(2).unwrap();
    assert!(
        xi_norm_field.contains('e') && xi_norm_field.split('.').nth(1).unwrap().len() >= 17,
        "unexpected float format {xi_norm_field}"
    );

    for check in ["chain", "gap", "summable", "dissipation:2", "rate:2,3,0.2"] {
        let out = run_ok(&[
            "verify",
            "--chain",
            chain.to_str().unwrap(),
            "--check",
            check,
        ]);
        let verdict: serde_json::Value =
            serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
        assert_eq!(verdict["ok"], serde_json::json!(true), "check {check}");
    }

    run_ok(&[
        "plot",
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        svg.to_str().unwrap(),
    ]);
    let svg_text = std::fs::read_to_string(&svg).unwrap();
    assert!(svg_text.starts_with("<svg"));
    assert_eq!(svg_text.matches("<polyline").count(), 2);
}

#[test]
fn exit_codes_follow_the_contract() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let out = dir.path().join("out.svg");

    // Validation errors: 2.
    assert_eq!(
        exit_code(&[
            "gen", "--kind", "nonsense", "--dim", "2", "--len", "3", "--seed", "0", "--out",
            dir.path().join("x.json").to_str().unwrap(),
        ]),
        2
    );
    // gap generator without delta: 2.
    assert_eq!(
        exit_code(&[
            "gen", "--kind", "gap", "--dim", "2", "--len", "3", "--seed", "0", "--out",
            dir.path().join("x.json").to_str().unwrap(),
        ]),
        2
    );
    // Malformed chain file: 2.
    let bad_chain = dir.path().join("bad.json");
    std::fs::write(&bad_chain, "{\"dim\": 2, \"terms\": []}").unwrap();
    assert_eq!(
        exit_code(&[
            "run",
            "--chain",
            bad_chain.to_str().unwrap(),
            "--steps",
            "10",
            "--out",
            dir.path().join("t.csv").to_str().unwrap(),
        ]),
        2
    );
    // IO errors: 4.
    assert_eq!(
        exit_code(&[
            "plot",
            "--trace",
            missing.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]),
        4
    );
    // clap usage errors also exit 2.
    assert_eq!(exit_code(&["run"]), 2);
}

#[test]
fn verify_rejects_increasing_chain_with_witness() {
    let dir = tempfile::tempdir().unwrap();
    let chain = dir.path().join("bad-order.json");
    let file = serde_json::json!({
        "dim": 2,
        "terms": [
            {"dim": 2, "rows": [[0.5, 0.0], [0.0, 0.5]]},
            {"dim": 2, "rows": [[0.6, 0.0], [0.0, 0.6]]}
        ],
        "meta": {"generator": "handmade", "seed": 0, "params": {}}
    });
    std::fs::write(&chain, serde_json::to_string(&file).unwrap()).unwrap();
    let out = bin()
        .args(["verify", "--chain", chain.to_str().unwrap(), "--check", "chain"])
        .output()
        .expect("binary runs");
    assert_eq!(out.status.code(), Some(2));
    let stdout = String::from_utf8(out.stdout).unwrap();
    let verdict: serde_json::Value = serde_json::from_str(&stdout).unwrap();
    assert_eq!(verdict["ok"], serde_json::json!(false));
    let witness = verdict["witness"]["step_witnesses"][0].as_f64().unwrap();
    assert!((witness + 0.1).abs() < 1e-9, "witness {witness}");
}

#[test]
fn rotation_subcommand_modes() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("report.json");
    let chain = dir.path().join("rot.json");

    let out = run_ok(&["rotation2d", "--delta", "0.2", "--analyze"]);
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!(parsed["log10_n"].as_f64().unwrap() > 1e4);

    run_ok(&[
        "rotation2d",
        "--delta",
        "0.2",
        "--n",
        "2000",
        "--target-angle",
        "0.1",
        "--out",
        chain.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert!((parsed["phi_n"].as_f64().unwrap() - 0.1).abs() < 1e-9);
    assert_eq!(parsed["bounds_ok"]["alpha"], serde_json::json!(true));
    assert_eq!(parsed["bounds_ok"]["beta"], serde_json::json!(true));
    assert_eq!(parsed["bounds_ok"]["sums"], serde_json::json!(true));
    assert!(chain.exists());

    // target-norm picks lambda so the product norm lands exactly there.
    let out = run_ok(&[
        "rotation2d",
        "--delta",
        "0.2",
        "--n",
        "2000",
        "--target-angle",
        "0.1",
        "--target-norm",
        "0.8",
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert!((parsed["product_norm"].as_f64().unwrap() - 0.8).abs() < 1e-9);

    // Unreachable target: validation error.
    assert_eq!(
        exit_code(&[
            "rotation2d",
            "--delta",
            "0.2",
            "--n",
            "5",
            "--target-angle",
            "1.5",
        ]),
        2
    );
}

#[test]
fn rate_subcommand_closed_form() {
    let out = run_ok(&[
        "rate", "--m", "10", "--k", "1", "--eps", "0.04", "--norm-sq", "1.0",
    ]);
    let parsed: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(parsed["n"], serde_json::json!(77));
    assert_eq!(parsed["gamma"], serde_json::json!(0.5));
}

#[test]
fn sweep_runs_manifest_and_reports_failures() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = dir.path().join("manifest.json");
    let manifest = serde_json::json!({
        "configs": [
            {
                "chain": {"kind": "commuting", "dim": 3, "len": 12, "seed": 1},
                "sigma": "identity",
                "xi": "random:1",
                "horizon": 5000,
                "k": 2,
                "out_trace": "a.csv"
            },
            {
                "chain": {"kind": "gap", "dim": 3, "len": 12, "seed": 2, "delta": 0.3},
                "sigma": "interleave:2",
                "xi": "basis:1",
                "horizon": 5000,
                "k": 2,
                "out_trace": "b.csv"
            }
        ]
    });
    std::fs::write(&manifest_path, serde_json::to_string(&manifest).unwrap()).unwrap();
    let out_dir = dir.path().join("runs");
    run_ok(&[
        "sweep",
        "--manifest",
        manifest_path.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out_dir.join("a.csv").exists());
    assert!(out_dir.join("b.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["total_configs"], serde_json::json!(2));
    assert_eq!(summary["total_failed"], serde_json::json!(0));

    // A manifest with a missing chain file: per-config failure, exit 3.
    let bad = serde_json::json!({
        "configs": [{
            "chain": {"file": dir.path().join("nope.json")},
            "sigma": "identity",
            "xi": "random:0",
            "horizon": 10,
            "k": 1,
            "out_trace": "c.csv"
        }]
    });
    std::fs::write(&manifest_path, serde_json::to_string(&bad).unwrap()).unwrap();
    assert_eq!(
        exit_code(&[
            "sweep",
            "--manifest",
            manifest_path.to_str().unwrap(),
            "--out-dir",
            out_dir.to_str().unwrap(),
        ]),
        3
    );
}

/// The SVG emitter is byte-stable: a fixed small trace renders to the
/// committed golden file.
#[test]
fn plot_matches_golden_svg() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("golden-trace.csv");
    std::fs::write(
        &trace,
        "step,sigma_index,xi_norm,dist_to_P,adjoint_dist,f_functional\n\
         0,0,1.0000000000000000e0,7.0710678118654746e-1,7.0710678118654746e-1,2.5000000000000000e-1\n\
         1,1,7.9056941504209488e-1,3.5355339059327368e-1,4.1000000000000000e-1,1.2500000000000000e-1\n\
         2,2,7.2886898685566496e-1,1.7677669529663684e-1,2.2000000000000000e-1,6.2500000000000000e-2\n\
         3,3,7.1589105000000000e-1,8.8388347648318421e-2,1.1000000000000000e-1,3.1250000000000000e-2\n",
    )
    .unwrap();
    let out = dir.path().join("golden-out.svg");
    run_ok(&[
        "plot",
        "--trace",
        trace.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    let produced = std::fs::read(&out).unwrap();
    let golden_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/trace.svg");
    let golden = std::fs::read(&golden_path).expect("golden file committed");
    assert_eq!(
        produced, golden,
        "SVG output drifted from the golden file; regenerate deliberately if intended"
    );
}
