//! End-to-end checks of the experiment CLI: exit codes, CSV structure,
//! config loading, and byte-identical reruns.

use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_capa-sense"))
}

#[test]
fn gl_convergence_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gl.csv");
    let status = bin()
        .args([
            "gl-convergence",
            "--n-min",
            "8",
            "--n-max",
            "16",
            "--n-step",
            "8",
            "--out",
        ])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(
        lines.next().unwrap(),
        "n_points,crb_integral_value,power_integral_value"
    );
    assert_eq!(lines.count(), 2);
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a.csv");
    let out_b = dir.path().join("b.csv");
    for out in [&out_a, &out_b] {
        let status = bin()
            .args([
                "mle-spectrum",
                "--gl-points",
                "16",
                "--seed",
                "5",
                "--policy",
                "random",
                "--window",
                "0.2",
                "--step",
                "0.1",
                "--out",
            ])
            .arg(out)
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert_eq!(
        std::fs::read(&out_a).unwrap(),
        std::fs::read(&out_b).unwrap()
    );
}

#[test]
fn scenario_config_file_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.toml");
    std::fs::write(
        &config,
        r#"
frequency_ghz = 28.0
tx_w_min = -1.0
tx_w_max = 0.0
tx_h_min = -0.5
tx_h_max = 0.5
rx_w_min = 0.0
rx_w_max = 1.0
rx_h_min = -0.5
rx_h_max = 0.5
power_mA2 = 100.0
noise_power = 5.6e-3
gl_points = 12

[[targets]]
position = [4.0, 0.0, 6.0]
reflection_re = 5.0
reflection_im = -2.0
"#,
    )
    .unwrap();
    let out = dir.path().join("opt.csv");
    let status = bin()
        .args(["optimize", "--gl-points", "12", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().count() > 2);
}

#[test]
fn bad_config_fails_with_nonzero_exit() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("broken.toml");
    std::fs::write(&config, "frequency_ghz = -3.0\n").unwrap();
    let output = bin()
        .args(["optimize", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert!(!output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("error"), "stderr: {stderr}");
}

#[test]
fn out_of_range_target_warns_but_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("far.toml");
    std::fs::write(
        &config,
        r#"
frequency_ghz = 28.0
tx_w_min = -1.0
tx_w_max = 0.0
tx_h_min = -0.5
tx_h_max = 0.5
rx_w_min = 0.0
rx_w_max = 1.0
rx_h_min = -0.5
rx_h_max = 0.5
power_mA2 = 100.0
noise_power = 5.6e-3
gl_points = 12

[[targets]]
position = [0.0, 0.0, 400.0]
reflection_re = 10.0
reflection_im = 10.0
"#,
    )
    .unwrap();
    let out = dir.path().join("opt.csv");
    let output = bin()
        .args(["optimize", "--gl-points", "12", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(output.status.success());
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(
        stderr.contains("radiating near field"),
        "expected a near-field warning, got: {stderr}"
    );
}
