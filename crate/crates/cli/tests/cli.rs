use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn real() -> String {
    fixtures().join("real/manifest.json").display().to_string()
}

fn synth() -> String {
    fixtures().join("synth/manifest.json").display().to_string()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gesture-fidelity"))
        .args(args)
        .env("GESTURE_FIDELITY_THREADS", "2")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn angles_writes_fifteen_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["angles", "--real", &real(), "--synth", &synth(), "--bins", "36", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json(&dir.path().join("table3.json"));
    assert_eq!(rows.as_array().unwrap().len(), 15);
    assert!(!dir.path().join("table1.json").exists());
    let prov = json(&dir.path().join("provenance.json"));
    assert_eq!(prov["config"]["bins"], 36);
}

#[test]
fn alignment_gas_is_weighted_sum() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["alignment", "--real", &real(), "--synth", &synth(), "--alpha", "0.5", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = json(&dir.path().join("alignment.json"));
    let rows = rows.as_array().unwrap();
    assert_eq!(rows.len(), 48);
    for r in rows {
        let (vas, pas) = (r["vas"].as_f64().unwrap(), r["pas"].as_f64().unwrap());
        let g = &r["gas"][0];
        assert_eq!(g["alpha"].as_f64().unwrap(), 0.5);
        assert!((g["gas"].as_f64().unwrap() - (0.5 * pas + 0.5 * vas)).abs() < 1e-12);
    }
}

#[test]
fn report_self_comparison_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["report", "--real", &real(), "--synth", &real(), "--perplexity", "5", "--out", out]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let t1 = json(&dir.path().join("table1.json"));
    let synth_row = &t1.as_array().unwrap()[1];
    assert!(synth_row["fid"].as_f64().unwrap() <= 1e-6);
    assert!(synth_row["fvd"].as_f64().unwrap() <= 1e-6);
    for p in json(&dir.path().join("table3.json")).as_array().unwrap() {
        assert!(p["kl"].as_f64().unwrap() <= 1e-6);
        assert!(p["emd_deg"].as_f64().unwrap() <= 1e-6);
    }
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let names = ["tsne_points.csv", "ellipses.csv", "distances.csv", "provenance.json"];
    let mut runs = Vec::new();
    for _ in 0..2 {
        let o = run(&["diversity", "--real", &real(), "--synth", &synth(), "--seed", "9", "--format", "csv", "--out", out]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        runs.push(names.map(|n| std::fs::read(dir.path().join(n)).unwrap()));
    }
    for (i, name) in names.iter().enumerate() {
        assert!(runs[0][i] == runs[1][i], "{name} differs");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(code(&run(&["kinematics", "--real", &real()])), 2);
    assert_eq!(code(&run(&["nonsense"])), 2);
    assert_eq!(code(&run(&["alignment", "--real", &real(), "--synth", &synth(), "--alpha", "1.5", "--out", out])), 2);
    assert_eq!(code(&run(&["kinematics", "--real", "/missing.json", "--synth", &synth(), "--out", out])), 1);
    // 24 points cannot support perplexity 10.
    assert_eq!(code(&run(&["diversity", "--real", &real(), "--synth", &real(), "--out", out])), 1);
    assert_eq!(code(&run(&["validate", "--real", &real(), "--synth", &synth()])), 0);
    assert_eq!(code(&run(&["validate", "--real", "/missing.json"])), 1);
    let bad_threads = Command::new(env!("CARGO_BIN_EXE_gesture-fidelity"))
        .args(["validate", "--real", &real()])
        .env("GESTURE_FIDELITY_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(code(&bad_threads), 2);
}

#[test]
fn prompts_writes_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let frames = dir.path().join("frames");
    for object in ["red_cup", "power_drill"] {
        let d = frames.join(object);
        std::fs::create_dir_all(&d).unwrap();
        std::fs::write(d.join("start.png"), b"").unwrap();
        std::fs::write(d.join("end.png"), b"").unwrap();
    }
    let out = dir.path().join("jobs");
    let o = run(&[
        "prompts",
        "--objects",
        "red cup,power drill",
        "--frames-dir",
        frames.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("12 prompts, 48 expected videos"));
    let jobs = json(&out.join("jobs.json"));
    let jobs = jobs.as_array().unwrap();
    assert_eq!(jobs.len(), 12);
    assert!(jobs[0]["prompt_text"].as_str().unwrap().contains("red cup"));

    let missing = run(&["prompts", "--objects", "kettle", "--frames-dir", frames.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(code(&missing), 1);
}
