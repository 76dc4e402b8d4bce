use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use framer_core::nalgebra::DVector;
use framer_core::synthesis::{GainCertificate, SdpProblem};
use framer_core::AbstractionModel;
use serde_json::{json, Value};
use tempfile::TempDir;

fn framer(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_framer"))
        .args(args)
        .output()
        .expect("spawn framer")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn predator_prey(dir: &Path, out: &str, observer: Value) -> PathBuf {
    write_config(
        dir,
        &format!("{out}.json"),
        &json!({
            "system": { "predator_prey": {} },
            "observer": observer,
            "output": { "dir": out },
        }),
    )
}

fn linear_toy() -> Value {
    json!({
        "a": [[0.5, 0.1], [0.0, 0.4]],
        "c": [[1.0, 0.0]],
        "w": [[0.1, 0.0], [0.0, 0.1]],
        "v": [[1.0]],
        "noise_w": { "lower": [-0.1, -0.1], "upper": [0.1, 0.1] },
        "noise_v": { "lower": [-0.05], "upper": [0.05] },
        "domain": { "lower": [-5.0, -5.0], "upper": [5.0, 5.0] },
        "x0_box": { "lower": [-1.0, -1.0], "upper": [1.0, 1.0] }
    })
}

#[test]
fn same_seed_gives_byte_identical_outputs() {
    let dir = TempDir::new().unwrap();
    let a = predator_prey(dir.path(), "a", json!({ "seed": 7, "horizon": 300 }));
    let b = predator_prey(dir.path(), "b", json!({ "seed": 7, "horizon": 300 }));
    assert_eq!(code(&framer(&["run", a.to_str().unwrap()])), 0);
    assert_eq!(code(&framer(&["run", b.to_str().unwrap()])), 0);
    for file in ["trajectory.csv", "summary.json", "model.json"] {
        let x = fs::read(dir.path().join("a").join(file)).unwrap();
        let y = fs::read(dir.path().join("b").join(file)).unwrap();
        assert!(x == y, "{file} differs between identical runs");
    }
    let csv = fs::read_to_string(dir.path().join("a/trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 302);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("a/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["violations"], 0);
    assert_eq!(summary["seed"], 7);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = TempDir::new().unwrap();
    let gain = json!([[0.05, 0.0, 0.0], [0.0, 0.05, 0.0], [0.0, 0.0, 0.0]]);
    let cfg = predator_prey(
        dir.path(),
        "s",
        json!({ "seed": 1, "horizon": 50, "gain": { "matrix": gain } }),
    );
    let run = |seed: &str| {
        assert_eq!(
            code(&framer(&["run", cfg.to_str().unwrap(), "--seed", seed])),
            0
        );
        fs::read(dir.path().join("s/trajectory.csv")).unwrap()
    };
    let (x, y, z) = (run("3"), run("4"), run("3"));
    assert_eq!(x, z);
    assert_ne!(x, y);
}

#[test]
fn multi_seed_run_writes_per_seed_files() {
    let dir = TempDir::new().unwrap();
    let cfg = predator_prey(
        dir.path(),
        "m",
        json!({ "seed": 10, "runs": 3, "horizon": 40 }),
    );
    assert_eq!(code(&framer(&["run", cfg.to_str().unwrap()])), 0);
    for seed in 10..13 {
        assert!(dir
            .path()
            .join(format!("m/trajectory_seed{seed}.csv"))
            .exists());
    }
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("m/summary.json")).unwrap())
            .unwrap();
    let seeds: Vec<u64> = summary["runs"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| r["seed"].as_u64().unwrap())
        .collect();
    assert_eq!(seeds, vec![10, 11, 12]);
}

#[test]
fn synth_on_benchmark_reports_no_gain() {
    let dir = TempDir::new().unwrap();
    let cfg = predator_prey(dir.path(), "syn", json!({}));
    let out = framer(&["synth", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("syn/certificate.json").exists());
    let run_cfg = predator_prey(
        dir.path(),
        "syn_run",
        json!({ "gain": "synthesize", "horizon": 5 }),
    );
    assert_eq!(code(&framer(&["run", run_cfg.to_str().unwrap()])), 3);
}

#[test]
fn synth_degenerate_instance_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "deg.json",
        &json!({
            "system": { "linear": {
                "a": [[0.0, 0.0]],
                "c": [[0.0, 0.0]],
                "h": [[0.0, 0.0]],
                "w": [[0.0]],
                "w_h": [[0.0]],
                "v": [[0.0]],
                "noise_w": { "lower": [0.0], "upper": [0.0] },
                "noise_v": { "lower": [0.0], "upper": [0.0] },
                "domain": { "lower": [-1.0, -1.0], "upper": [1.0, 1.0] },
                "x0_box": { "lower": [0.0], "upper": [0.0] },
                "d0_box": { "lower": [0.0], "upper": [0.0] }
            }}
        }),
    );
    assert_eq!(code(&framer(&["synth", cfg.to_str().unwrap()])), 3);
}

#[test]
fn certified_gain_round_trips_through_file() {
    let dir = TempDir::new().unwrap();
    let synth_cfg = write_config(
        dir.path(),
        "lin.json",
        &json!({ "system": { "linear": linear_toy() }, "output": { "dir": "lin" } }),
    );
    let out = framer(&["synth", synth_cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let cert_path = dir.path().join("lin/certificate.json");
    let cert = GainCertificate::from_json(&fs::read_to_string(&cert_path).unwrap()).unwrap();
    assert!(cert.gamma > 0.0);
    assert_eq!(cert.gain.shape(), (2, 1));

    let run_cfg = write_config(
        dir.path(),
        "lin_run.json",
        &json!({
            "system": { "linear": linear_toy() },
            "observer": { "gain": { "file": "lin/certificate.json" }, "runs": 3, "horizon": 100 },
            "output": { "dir": "lin_run" }
        }),
    );
    assert_eq!(code(&framer(&["run", run_cfg.to_str().unwrap()])), 0);
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("lin_run/summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["violations"], 0);
    assert!((summary["gamma"].as_f64().unwrap() - cert.gamma).abs() < 1e-15);
}

#[test]
fn tampered_certificate_is_rejected() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "lin.json",
        &json!({ "system": { "linear": linear_toy() }, "output": { "dir": "lin" } }),
    );
    assert_eq!(code(&framer(&["synth", cfg.to_str().unwrap()])), 0);
    let cert_path = dir.path().join("lin/certificate.json");
    let mut cert: Value = serde_json::from_str(&fs::read_to_string(&cert_path).unwrap()).unwrap();
    cert["gamma"] = json!(1e-12);
    fs::write(&cert_path, cert.to_string()).unwrap();
    let run_cfg = write_config(
        dir.path(),
        "run.json",
        &json!({
            "system": { "linear": linear_toy() },
            "observer": { "gain": { "file": "lin/certificate.json" } },
            "output": { "dir": "run" }
        }),
    );
    let out = framer(&["run", run_cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("certificate rejected"));
}

#[test]
fn unknown_key_is_named_and_exits_one() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        &json!({ "system": { "predator_prey": {} }, "observer": { "horizn": 10 } }),
    );
    let out = framer(&["run", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("observer") && err.contains("horizn"), "{err}");

    let zero = write_config(
        dir.path(),
        "zero.json",
        &json!({ "system": { "predator_prey": {} }, "observer": { "horizon": 0 } }),
    );
    let out = framer(&["run", zero.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("observer.horizon"));

    let missing = framer(&["run", dir.path().join("nope.json").to_str().unwrap()]);
    assert_eq!(code(&missing), 1);
}

#[test]
fn export_sdpa_parses_back() {
    let dir = TempDir::new().unwrap();
    let cfg = predator_prey(dir.path(), "x", json!({}));
    let path = dir.path().join("problem.dat-s");
    assert_eq!(
        code(&framer(&[
            "export-sdpa",
            cfg.to_str().unwrap(),
            path.to_str().unwrap()
        ])),
        0
    );
    let problem = SdpProblem::from_sdpa_str(&fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(problem.block_struct[..2], [12, 13]);
    assert!(problem.num_vars() > 0);
}

#[test]
fn learn_with_auto_kappa_writes_sound_model() {
    let dir = TempDir::new().unwrap();
    let samples: Vec<Value> = (0..30)
        .map(|t| {
            let x = -1.0 + 2.0 * t as f64 / 29.0;
            let (lo, hi) = (x - 0.02, x + 0.02);
            json!({
                "input_box": { "lower": [lo], "upper": [hi] },
                "output_box": { "lower": [lo.sin()], "upper": [hi.sin()] }
            })
        })
        .collect();
    fs::write(
        dir.path().join("data.json"),
        json!({ "samples": samples }).to_string(),
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "learn.json",
        &json!({
            "system": { "predator_prey": {} },
            "learner": { "kappa": "auto", "data": "data.json" },
            "output": { "dir": "l" }
        }),
    );
    let out = framer(&["learn", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let model =
        AbstractionModel::from_json(&fs::read_to_string(dir.path().join("l/model.json")).unwrap())
            .unwrap();
    assert_eq!(model.len(), 30);
    for k in 0..50 {
        let z = -0.9 + 1.8 * k as f64 / 49.0;
        let env = model.eval_envelope(&DVector::from_vec(vec![z])).unwrap();
        assert!(
            env.lower()[0] <= z.sin() + 1e-12 && z.sin() <= env.upper()[0] + 1e-12,
            "z = {z}"
        );
    }

    let run_cfg = write_config(
        dir.path(),
        "auto_run.json",
        &json!({ "system": { "predator_prey": {} }, "learner": { "kappa": "auto" }, "observer": { "horizon": 5 } }),
    );
    assert_eq!(code(&framer(&["run", run_cfg.to_str().unwrap()])), 1);
}

#[test]
fn check_passes_on_benchmark() {
    let dir = TempDir::new().unwrap();
    let cfg = predator_prey(dir.path(), "c", json!({ "runs": 3, "horizon": 200 }));
    let out = framer(&["check", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stdout));
    let report: Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("c/check.json")).unwrap())
            .unwrap();
    assert_eq!(report["passed"], true);
    assert!(report["items"].as_array().unwrap().len() >= 8);
}
