use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use gwspectra_core::spectra::smoothed_reference;

fn gw(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gwspectra"))
        .args(args)
        .current_dir(cwd)
        .env_remove("GWSPECTRA_WORKERS")
        .output()
        .expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

#[test]
fn forbidden_set_measure_is_below_epsilon() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gw(&["forbidden-set", "--epsilon", "0.1", "--k-max", "8", "--seed", "1", "--out", "fs"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_slice(&fs::read(tmp.path().join("fs/forbidden.json")).unwrap()).unwrap();
    let measure: f64 =
        v["intervals"].as_array().unwrap().iter().map(|iv| iv[1].as_f64().unwrap() - iv[0].as_f64().unwrap()).sum();
    assert!(measure <= 0.1, "{measure}");
}

#[test]
fn unknown_flag_exits_2_with_usage() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gw(&["ks-core", "--d", "3", "--frobnicate"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn missing_seed_is_a_validation_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gw(&["forbidden-set", "--epsilon", "0.1"], tmp.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_law_exits_2_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("c.json");
    fs::write(
        &cfg,
        r#"{"pipeline": "density", "seed": 1, "law": {"kind": "poisson", "params": {"mean": 2}}, "output_dir": "o"}"#,
    )
    .unwrap();
    let o = gw(&["run", cfg.to_str().unwrap()], tmp.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("o").exists());
}

#[test]
fn sample_tree_is_replayable_and_worker_invariant() {
    let tmp = tempfile::tempdir().unwrap();
    let a = gw(
        &["sample-tree", "--law", "poisson:2", "--depth", "5", "--seed", "7", "--count", "3", "--out", "a"],
        tmp.path(),
    );
    let b = gw(
        &[
            "sample-tree",
            "--law",
            "poisson:2",
            "--depth",
            "5",
            "--seed",
            "7",
            "--count",
            "3",
            "--out",
            "b",
            "--workers",
            "3",
        ],
        tmp.path(),
    );
    assert!(a.status.success() && b.status.success());
    let (ra, rb) = (read_dir_sorted(&tmp.path().join("a")), read_dir_sorted(&tmp.path().join("b")));
    assert_eq!(ra, rb);
    assert_eq!(ra.iter().filter(|(n, _)| n.starts_with("trees/")).count(), 3);
    // Replay from the manifest.
    let m = tmp.path().join("a/manifest.json");
    let c = gw(&["run", m.to_str().unwrap(), "--out", "c"], tmp.path());
    assert!(c.status.success());
    assert_eq!(read_dir_sorted(&tmp.path().join("c")), ra);
}

#[test]
fn anderson_without_disorder_reproduces_kesten_mckay() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("a.json");
    fs::write(
        &cfg,
        r#"{"pipeline": "anderson", "d": 3, "lambda": 0, "seed": 5, "E": 1.5, "grid_size": 6,
            "pool_size": 64, "eta_schedule": [1.0, 0.3, 0.1, 0.05], "sweeps": 200, "hold_sweeps": 2000}"#,
    )
    .unwrap();
    let run = |out: &str, workers: &str| {
        let o = gw(&["run", cfg.to_str().unwrap(), "--out", out, "--workers", workers], tmp.path());
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run("x", "1");
    run("y", "4");
    assert_eq!(read_dir_sorted(&tmp.path().join("x")), read_dir_sorted(&tmp.path().join("y")));
    let csv = fs::read_to_string(tmp.path().join("x/density.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config_hash="));
    assert_eq!(lines.next().unwrap(), "d,lambda,x,eta,f,se");
    let mut n = 0;
    for l in lines {
        let v: Vec<f64> = l.split(',').map(|t| t.parse().unwrap()).collect();
        let want = smoothed_reference(v[2], v[3], 1.5);
        assert!((v[4] - want).abs() < 1e-8, "{l} vs {want}");
        n += 1;
    }
    assert_eq!(n, 6);
}

#[test]
fn non_convergence_exits_3_with_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gw(
        &[
            "solve-rde",
            "--law",
            "poisson:3",
            "--re-z",
            "0.4",
            "--lambda",
            "1",
            "--seed",
            "2",
            "--pool-size",
            "2000",
            "--eta",
            "0.01",
            "--sweeps",
            "20",
            "--hold",
            "0",
            "--out",
            "r",
        ],
        tmp.path(),
    );
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("r/rde.csv")).unwrap();
    assert!(csv.lines().last().unwrap().ends_with(",0"));
    assert!(tmp.path().join("r/manifest.json").exists());
}

#[test]
fn contraction_lab_writes_a_positive_gap() {
    let tmp = tempfile::tempdir().unwrap();
    let o =
        gw(&["contraction-lab", "--trials", "5000", "--E", "1.5", "--p", "2", "--seed", "7", "--out", "c"], tmp.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(out["summary"]["epsilon"].as_f64().unwrap() > 0.0);
    assert!(tmp.path().join("c/calibration.json").exists());
}
