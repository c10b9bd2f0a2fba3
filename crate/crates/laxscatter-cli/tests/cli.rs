//! Exit-code contract and artifact checks for the binary.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_laxscatter"))
}

#[test]
fn norms_runs_deterministically() {
    let dir = tempdir("norms");
    let run = |sub: &str| {
        let out = bin()
            .args(["norms", "--grid-n", "512", "--out"])
            .arg(dir.join(sub))
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        std::fs::read(dir.join(sub).join("norms.json")).unwrap()
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b, "norms reports differ between identical runs");
}

#[test]
fn transmission_writes_expected_artifacts() {
    let dir = tempdir("transmission");
    let out = bin()
        .args(["transmission", "--k", "2", "--grid-n", "1024", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.join("transmission.csv")).unwrap();
    assert!(csv.starts_with("k,re_t_inv,im_t_inv,method,x_span"));
    assert!(csv.lines().count() >= 3);
    assert!(dir.join("transmission.json").exists());
}

#[test]
fn malformed_config_exits_with_input_error() {
    let dir = tempdir("badcfg");
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, r#"{"grid_n": 512, "unknown_key": 1}"#).unwrap();
    let out = bin()
        .args(["norms", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("unknown_key") || msg.contains("unknown field"), "{msg}");
}

#[test]
fn malformed_spec_exits_with_input_error() {
    let dir = tempdir("badspec");
    let spec = dir.join("spec.json");
    std::fs::write(&spec, r#"{"omegas": "nonsense"}"#).unwrap();
    let out = bin()
        .args(["transmission", "--k", "2", "--spec"])
        .arg(&spec)
        .arg("--out")
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn impossible_tolerance_exits_with_code_2() {
    let dir = tempdir("tol");
    let out = bin()
        .args([
            "transmission",
            "--k",
            "2",
            "--grid-n",
            "1024",
            "--tol",
            "1e-30",
            "--out",
        ])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("laxscatter-cli-test-{tag}-{}", std::process::id()));
    if Path::new(&dir).exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
