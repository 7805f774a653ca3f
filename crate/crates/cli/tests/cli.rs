//! Behavior tests for the command-line front end: schemas, overrides,
//! exit codes, and artifact shapes.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fermichain"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

/// The uniform-tail residual density: chain coefficients must be constant.
const SEMICIRCLE_CHAIN_TOML: &str = r#"
[density]
kind = "semicircle"
scale = 0.15915494309189535
lo = 0.0
hi = 2.0

[chain]
n_env = 20
quadrature_nodes = 6000
"#;

#[test]
fn chain_coeffs_of_the_residual_semicircle_are_constant() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("chain.toml");
    write(&config, SEMICIRCLE_CHAIN_TOML);
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "chain-coeffs",
            "--config",
            config.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("chain.csv")).unwrap();
    for line in csv.lines().filter(|l| !l.starts_with('#') && !l.starts_with('n')) {
        let cols: Vec<&str> = line.split(',').collect();
        let omega: f64 = cols[1].parse().unwrap();
        assert!((omega - 1.0).abs() < 1e-10, "omega {omega}");
        if !cols[2].is_empty() {
            let kappa: f64 = cols[2].parse().unwrap();
            assert!((kappa - 0.5).abs() < 1e-10, "kappa {kappa}");
        }
    }
    assert!(out.join("manifest.json").is_file());
}

#[test]
fn missing_config_file_exits_with_io_code() {
    let output = bin()
        .args(["chain-coeffs", "--config", "/nonexistent/nope.toml"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(4));
    let msg = String::from_utf8_lossy(&output.stderr);
    assert!(msg.contains("/nonexistent/nope.toml"), "stderr: {msg}");
}

#[test]
fn unknown_config_key_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("chain.toml");
    write(
        &config,
        &format!("{SEMICIRCLE_CHAIN_TOML}\n[typo_section]\nx = 1\n"),
    );
    let output = bin()
        .args(["chain-coeffs", "--config", config.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn overrides_change_the_run_and_land_in_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("chain.toml");
    write(&config, SEMICIRCLE_CHAIN_TOML);
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "chain-coeffs",
            "--config",
            config.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
            "--set",
            "chain.n_env=5",
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("chain.csv")).unwrap();
    let rows = csv
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('n'))
        .count();
    assert_eq!(rows, 5);
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("chain.n_env=5"));
}

#[test]
fn closure_fit_is_deterministic_across_runs() {
    // a deliberately loose tolerance so the multi-start loop exits early
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        let status = bin()
            .args([
                "closure-fit",
                "--n-modes",
                "2",
                "--tolerance",
                "0.5",
                "--output-dir",
                out.to_str().unwrap(),
            ])
            .status()
            .unwrap();
        assert!(status.success());
        std::fs::read(out.join("closure_n2.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn closure_rescale_writes_physical_parameters() {
    let dir = tempfile::tempdir().unwrap();
    let table = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/closure_n6.csv");
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "closure-rescale",
            "--table",
            table.to_str().unwrap(),
            "--omega0",
            "0.375",
            "--kappa",
            "0.6875",
            "--fill",
            "empty",
            "--output-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(out.join("closure_params.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().skip(1).collect();
    assert_eq!(rows.len(), 6);
    for line in &rows {
        let cols: Vec<&str> = line.split(',').collect();
        let gamma: f64 = cols[3].parse().unwrap();
        assert!(gamma >= 0.0, "negative damping: {line}");
    }
}

#[test]
fn modulate_emits_sampled_densities() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("leads.toml");
    write(
        &config,
        r#"
[[leads]]
temperature = 0.2
mu = 1.0
[leads.density]
kind = "semicircle"
scale = 0.15915494309189535
lo = 0.0
hi = 2.0
"#,
    );
    let out = dir.path().join("out");
    let status = bin()
        .args([
            "modulate",
            "--config",
            config.to_str().unwrap(),
            "--output-dir",
            out.to_str().unwrap(),
        ])
        .status()
        .unwrap();
    assert!(status.success());
    for name in ["modulated_empty.csv", "modulated_filled.csv"] {
        let csv = std::fs::read_to_string(out.join(name)).unwrap();
        assert!(csv.lines().count() > 1000, "{name} too short");
        assert!(csv.starts_with("omega,j\n"));
    }
}
