use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str], input: &Path, prefix: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_isofol"))
        .args(args)
        .arg("--input")
        .arg(input)
        .arg("--out-prefix")
        .arg(prefix)
        .output()
        .unwrap()
}

fn report(prefix: &Path) -> Value {
    let text = std::fs::read_to_string(prefix.with_extension("report.json")).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn detect_eq11_framed_kernel_is_six() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("eq11");
    let o = run(&["detect"], &config("eq11_generic.json"), &prefix);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&prefix);
    assert_eq!(r["status"], "ok");
    assert_eq!(r["result"]["summary"]["generic_kernel_dimension"], 6);
    assert_eq!(r["result"]["summary"]["failures"], 0);
    let csv = std::fs::read_to_string(prefix.with_extension("scan.csv")).unwrap();
    assert!(csv.starts_with("re(a1),im(a1),"));
    assert_eq!(csv.lines().count(), 3);
}

#[test]
fn detect_degenerate_class_mode() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("deg");
    let o = run(&["detect", "--mode", "class"], &config("eq11_degenerate.json"), &prefix);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&prefix);
    assert_eq!(r["settings"]["mode"], "class");
    assert_eq!(r["result"]["reports"].as_array().unwrap().len(), 2);
}

#[test]
fn missing_input_writes_nothing() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("none");
    let o = run(&["detect"], &dir.path().join("absent.json"), &prefix);
    assert_eq!(o.status.code(), Some(2));
    assert!(!prefix.with_extension("report.json").exists());
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
}

#[test]
fn malformed_json_reports_position() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("bad.json");
    std::fs::write(&input, "{\n  \"family\": \"eq11\",\n  \"points\": [[1.0,\n}\n").unwrap();
    let prefix = dir.path().join("bad");
    let o = run(&["detect"], &input, &prefix);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4 column"), "{}", stderr(&o));
    assert!(!prefix.with_extension("report.json").exists());
}

#[test]
fn knobs_out_of_range_are_rejected() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("knob");
    for bad in [
        ["--rel-tol", "1e-3"],
        ["--fd-step", "1e-12"],
        ["--rank-eps", "0"],
        ["--rank-eps", "1"],
        ["--mode", "diagonal"],
    ] {
        let o = run(&["detect", bad[0], bad[1]], &config("eq11_generic.json"), &prefix);
        assert_eq!(o.status.code(), Some(2), "{bad:?}");
    }
    assert!(!prefix.with_extension("report.json").exists());
}

#[test]
fn torus_check_standard() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("torus");
    let o = run(&["torus-check"], &config("torus_standard.json"), &prefix);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&prefix);
    let f: Vec<[f64; 2]> = serde_json::from_value(r["result"]["first_integrals"].clone()).unwrap();
    let want = [[0.0, -1.0], [1.0, 0.0], [0.0, -1.0]];
    for (got, want) in f.iter().zip(want) {
        assert!((got[0] - want[0]).abs() < 1e-12 && (got[1] - want[1]).abs() < 1e-12, "{f:?}");
    }
    let cmp = &r["result"]["comparison"];
    assert_eq!(cmp["agrees"], true);
    assert_eq!(cmp["analytic_kernel_dimension"], 12);
    assert_eq!(cmp["class_kernel_dimension"], 12);
    assert!(cmp["max_principal_angle"].as_f64().unwrap() < 1e-6);
}

#[test]
fn reports_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let args = ["detect", "--samples", "3", "--seed", "7"];
    assert_eq!(run(&args, &config("eq11_generic.json"), &a).status.code(), Some(0));
    assert_eq!(run(&args, &config("eq11_generic.json"), &b).status.code(), Some(0));
    for ext in ["report.json", "scan.csv"] {
        let x = std::fs::read(a.with_extension(ext)).unwrap();
        let y = std::fs::read(b.with_extension(ext)).unwrap();
        assert_eq!(x, y, "{ext}");
    }
}

#[test]
fn unsatisfiable_sampling_is_a_numerical_failure() {
    let dir = TempDir::new().unwrap();
    let input = dir.path().join("flat.json");
    // Every lattice vector is pinned to zero, so no draw is admissible.
    let mut cfg: Value =
        serde_json::from_str(&std::fs::read_to_string(config("torus_standard.json")).unwrap()).unwrap();
    let mut domain = vec![[0.0, 0.0]; 16];
    domain.extend([[-1.0, 1.0], [-1.0, 1.0]]);
    cfg["domain"] = serde_json::to_value(domain).unwrap();
    std::fs::write(&input, cfg.to_string()).unwrap();
    let prefix = dir.path().join("flat");
    let o = run(&["torus-check", "--samples", "4"], &input, &prefix);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
    let r = report(&prefix);
    assert_eq!(r["status"], "failed");
    assert!(r["error"].as_str().unwrap().contains("sampl"), "{}", r["error"]);
    assert!(r["result"]["first_integrals"].is_array());
}

#[test]
fn monodromy_and_schlesinger_runs() {
    let dir = TempDir::new().unwrap();
    let prefix = dir.path().join("mono");
    let o = run(&["monodromy"], &config("monodromy_3pole.json"), &prefix);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&prefix);
    assert_eq!(r["result"]["tuple"]["matrices"].as_array().unwrap().len(), 3);
    assert!(r["result"]["product_defect"].as_f64().unwrap() < 1e-6);

    let prefix = dir.path().join("flow");
    let o = run(&["schlesinger"], &config("schlesinger_3pole.json"), &prefix);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r = report(&prefix);
    assert!(r["result"]["drift"].as_f64().unwrap() < 1e-6);
    let poles = &r["result"]["flowed_system"]["poles"];
    assert!((poles[0][0].as_f64().unwrap() - 0.5).abs() < 1e-12);
}
