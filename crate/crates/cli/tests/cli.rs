//! End-to-end contract tests for the `ddr` binary: exit codes, file outputs,
//! and report determinism.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ddr"))
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join("ddr_cli_tests");
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn gen_hex_writes_mesh_with_expected_counts() {
    let out = tmp("hex2.json");
    let st = bin()
        .args([
            "mesh",
            "gen-hex",
            "--n",
            "2",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(st.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["elements"].as_array().unwrap().len(), 8);
    assert_eq!(v["metadata"]["b2"], 0);
}

#[test]
fn gen_voided_reports_one_void_in_header() {
    let out = tmp("voided3.json");
    let st = bin()
        .args([
            "mesh",
            "gen-voided",
            "--n",
            "3",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(st.success());
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["metadata"]["b2"], 1);
    assert_eq!(v["elements"].as_array().unwrap().len(), 26);
}

#[test]
fn validate_good_mesh_exits_zero_and_bad_file_exits_two() {
    let out = tmp("hex_for_validate.json");
    bin()
        .args([
            "mesh",
            "gen-hex",
            "--n",
            "2",
            "--out",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    let st = bin()
        .args(["mesh", "validate", "--in", out.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    // a face off its plane by 1e-3 must be rejected with exit code 2
    let bad = tmp("bad.json");
    let payload = serde_json::json!({
        "vertices": [
            [0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [1.0, 1.0, 1e-3], [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [1.0, 1.0, 1.0], [0.0, 1.0, 1.0]
        ],
        "faces": [
            [0, 3, 2, 1], [4, 5, 6, 7], [0, 1, 5, 4],
            [1, 2, 6, 5], [2, 3, 7, 6], [3, 0, 4, 7]
        ],
        "elements": [[0, 1, 2, 3, 4, 5]]
    });
    std::fs::write(&bad, serde_json::to_string(&payload).unwrap()).unwrap();
    let st = bin()
        .args(["mesh", "validate", "--in", bad.to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(2));
}

#[test]
fn verify_whitney_suite_passes() {
    let mesh = tmp("hex1v.json");
    bin()
        .args([
            "mesh",
            "gen-hex",
            "--n",
            "1",
            "--out",
            mesh.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    let st = bin()
        .args([
            "verify",
            "--suite",
            "whitney",
            "--mesh",
            mesh.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
}

#[test]
fn unknown_op_is_usage_error_64() {
    let st = bin()
        .args([
            "poincare", "--op", "laplace", "--family", "hex", "--n-list", "2",
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(64));
    let st = bin().args(["nonsense-subcommand"]).status().unwrap();
    assert_eq!(st.code(), Some(64));
}

#[test]
fn reports_are_deterministic_modulo_timings() {
    let mesh = tmp("hex1d.json");
    bin()
        .args([
            "mesh",
            "gen-hex",
            "--n",
            "1",
            "--out",
            mesh.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    let run = || -> serde_json::Value {
        let out = bin()
            .args([
                "verify",
                "--suite",
                "all",
                "--mesh",
                mesh.to_str().unwrap(),
                "--k",
                "0",
                "--seed",
                "7",
            ])
            .output()
            .unwrap();
        let mut v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
        v.as_object_mut().unwrap().remove("timings");
        v
    };
    let a = run();
    let b = run();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
}

#[test]
fn magneto_runs_and_dumps_solution() {
    let mesh = tmp("voided3m.json");
    bin()
        .args([
            "mesh",
            "gen-voided",
            "--n",
            "3",
            "--out",
            mesh.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    let dump = tmp("sol.json");
    let st = bin()
        .args([
            "magneto",
            "--mesh",
            mesh.to_str().unwrap(),
            "--k",
            "0",
            "--f",
            "polynomial",
            "--dump",
            dump.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert_eq!(
        st.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&dump).unwrap()).unwrap();
    assert_eq!(v["u"]["descriptor"]["space"], "div");
    assert!(!v["u"]["data"].as_array().unwrap().is_empty());
}

#[test]
fn poincare_sweep_emits_csv() {
    let csv = tmp("sweep.csv");
    let st = bin()
        .args([
            "poincare",
            "--op",
            "grad",
            "--family",
            "hex",
            "--n-list",
            "2,3",
            "--k",
            "0",
            "--csv",
            csv.to_str().unwrap(),
            "--out",
            tmp("sweep.json").to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("n,h,dofs,c_num"));
    assert_eq!(text.lines().count(), 3);
}
