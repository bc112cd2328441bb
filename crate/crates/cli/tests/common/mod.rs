#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

pub fn xssd(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_xssd"));
    cmd.args(args).env("RUST_LOG", "warn");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

/// Runs `xssd synth` on `spec` and rewrites the produced run config with
/// `params` merged into its parameters. Returns the run config path.
pub fn synth_config(dir: &Path, spec: Value, params: Value) -> PathBuf {
    let spec_path = dir.join("spec.json");
    std::fs::write(&spec_path, spec.to_string()).unwrap();
    let data = dir.join("data");
    let out = xssd(
        &[
            "synth",
            "--config",
            spec_path.to_str().unwrap(),
            "--out",
            data.to_str().unwrap(),
        ],
        &[],
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cfg_path = data.join("run_config.json");
    let mut cfg: Value =
        serde_json::from_str(&std::fs::read_to_string(&cfg_path).unwrap()).unwrap();
    for (k, v) in params.as_object().unwrap() {
        cfg["parameters"][k] = v.clone();
    }
    std::fs::write(&cfg_path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    cfg_path
}

pub fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

/// Generator spec with the knobs the tests vary; anisotropy gives the
/// preprocessing a well-defined first component to remove.
pub fn spec(d: usize, n: usize, angle: f64, noise: f64, seed: u64) -> Value {
    serde_json::json!({
        "d": d, "n_a": n, "n_b": n, "angle_deg": angle, "noise_sigma": noise,
        "vocab_size": 3 * n, "seed": seed, "anisotropy": 3.0,
    })
}
