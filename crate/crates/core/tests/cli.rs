use std::path::{Path, PathBuf};
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_torus-rg"))
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, lambda: f64) -> PathBuf {
    let p = dir.join("run.json");
    let text = format!(
        r#"{{"frequency": "golden",
            "potential": {{"dim": 2, "ell": 3, "modes": [{{"q": [1, 0], "re": 0.5, "im": 0.0}}]}},
            "lambda": {lambda}, "lattice_bound": 12, "resonance_diagnostics": false,
            "trajectory": {{"samples": 11}}}}"#
    );
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_potential_file_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(
        &cfg,
        r#"{"frequency": "golden", "potential": {"path": "nope.json"}, "lambda": 0.001}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(1));
    assert!(!out.exists());
}

#[test]
fn zero_coupling_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.0);
    let out = dir.path().join("out");
    let st = bin().args(["solve", "--config"]).arg(&cfg).arg("--out").arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
    let x: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("x.json")).unwrap()).unwrap();
    assert_eq!(x["modes"].as_array().unwrap().len(), 0);
    let st = bin().arg("verify").arg(out.join("report.json")).status().unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn bundled_example_solves_and_verifies() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let st = bin()
        .args(["solve", "--config"])
        .arg(configs().join("golden_cosine.json"))
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(rep["final_norms"]["residual"].as_f64().unwrap() <= 1e-9);
    assert_eq!(rep["report_version"], 1);
    let csv = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(csv.starts_with("t,theta_1,theta_2,I_1,I_2\n"));
    let st = bin().args(["verify", "--out"]).arg(&out).status().unwrap();
    assert_eq!(st.code(), Some(0));
}

#[test]
fn verify_catches_a_corrupted_coefficient() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 1e-3);
    let out = dir.path().join("out");
    assert_eq!(
        bin()
            .args(["solve", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap()
            .code(),
        Some(0)
    );
    let xp = out.join("x.json");
    let mut doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&xp).unwrap()).unwrap();
    let v = doc["modes"][1]["im"][0].as_f64().unwrap();
    doc["modes"][1]["im"][0] = serde_json::json!(v + 1e-3);
    std::fs::write(&xp, doc.to_string()).unwrap();
    let o = bin().args(["verify", "--out"]).arg(&out).output().unwrap();
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL torus equation residual"));
}

#[test]
fn scan_over_couplings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.0);
    let out = dir.path().join("scan");
    let st = bin()
        .args(["scan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--param-list", "1e-5,1e-4,1e-3", "--jobs", "2"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("scan.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        let f: Vec<&str> = r.split(',').collect();
        assert_eq!(f[1], "ok");
        assert!(f[2].parse::<f64>().unwrap() <= 1e-9);
    }
    let st = bin()
        .args(["scan", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--param-list", "0"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    assert_eq!(std::fs::read_to_string(out.join("scan.csv")).unwrap().lines().count(), 2);
}

#[test]
fn bad_parameter_list() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.0);
    let st = bin()
        .args(["scan", "--config"])
        .arg(&cfg)
        .args(["--param-list", "x"])
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(1));
}

#[test]
fn diagnose_scales_at_zero_coupling() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), 0.0);
    let out = dir.path().join("diag");
    let st = bin()
        .args(["diagnose-scales", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(st.code(), Some(0));
    let scales = std::fs::read_to_string(out.join("scales.csv")).unwrap();
    assert!(scales.lines().next().unwrap().contains("mode_count"));
    let diag = std::fs::read_to_string(out.join("stage_diagnostics.csv")).unwrap();
    let header: Vec<&str> = diag.lines().next().unwrap().split(',').collect();
    for line in diag.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        for name in ["ward_const", "ward_deriv", "z_norm", "mean_mode"] {
            let i = header.iter().position(|h| *h == name).unwrap();
            assert_eq!(f[i].parse::<f64>().unwrap(), 0.0, "{name}");
        }
    }
}
