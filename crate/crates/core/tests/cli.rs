use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use alpha_harmonic::lab::Checkpoint;

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn ahlab(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ahlab")).args(args).output().unwrap()
}

fn run_into(cfg: &Path, out: &Path, threads: &str) -> std::process::Output {
    ahlab(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out.to_str().unwrap(),
        "--threads",
        threads,
    ])
}

#[test]
fn csv_is_byte_identical_across_runs_and_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = scenario("phase_diagram.toml");
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(run_into(&cfg, &a, "1").status.success());
    assert!(run_into(&cfg, &b, "4").status.success());
    for f in ["phase_diagram.csv", "plot_phase.csv"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["experiment"], "phase-diagram");
    assert_eq!(manifest["seed"], 7);
    let conflicts = manifest["conflicts"].as_array().unwrap();
    assert!(conflicts.iter().any(|c| c.as_str().unwrap().contains("(10, 2.5)")));
}

#[test]
fn unknown_key_exits_with_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "experiment = \"energy\"\n[manifold]\nkind = \"sphere\"\ndim = 2\nradius = 2\n").unwrap();
    let out = run_into(&cfg, &dir.path().join("o"), "1");
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("manifold.radius"), "{err}");
}

#[test]
fn audit_all_has_no_failures() {
    let dir = tempfile::tempdir().unwrap();
    let out = ahlab(&["audit-all", "--out-dir", dir.path().to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("audit.csv")).unwrap();
    let mut rdr = csv::Reader::from_reader(csv.as_bytes());
    let mut conflicts = 0;
    for r in rdr.records() {
        let r = r.unwrap();
        if &r[7] == "true" {
            conflicts += 1;
        } else {
            assert_eq!(&r[6], "true", "{r:?}");
        }
    }
    assert_eq!(conflicts, 4);
}

#[test]
fn flow_resumes_from_its_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    assert!(run_into(&scenario("flow_wiggle.toml"), &first, "1").status.success());
    let ck = Checkpoint::load(&first.join("flow_0.ckpt")).unwrap();
    assert_eq!((ck.source_dim, ck.n_per_axis, ck.values.len()), (1, 32, 32));
    assert!(ck.iteration > 0);

    let text = fs::read_to_string(scenario("flow_wiggle.toml")).unwrap();
    let cfg = dir.path().join("resume.toml");
    fs::write(&cfg, text.replace("max_iter = 5000", "max_iter = 5000\nresume = \"first/flow_0.ckpt\"")).unwrap();
    let second = dir.path().join("second");
    assert!(run_into(&cfg, &second, "1").status.success());
    let summary = fs::read_to_string(second.join("flow_summary.csv")).unwrap();
    let row: Vec<&str> = summary.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "converged");
    assert_eq!(row[2], "0");
}
