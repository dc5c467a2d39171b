use std::path::Path;
use std::process::{Command, Output};

fn skelbridge(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skelbridge")).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn tiny_config(dir: &Path) -> std::path::PathBuf {
    let out = skelbridge(&["default-config"]);
    assert!(out.status.success());
    let mut cfg: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    cfg["dataset"]["count"] = 8.into();
    cfg["dataset"]["holdout"] = 4.into();
    cfg["model"]["hidden_dim"] = 8.into();
    cfg["model"]["time_dim"] = 4.into();
    cfg["train"]["steps"] = 3.into();
    cfg["train"]["batch_size"] = 2.into();
    cfg["sample"]["num"] = 3.into();
    cfg["sample"]["steps"] = 5.into();
    let path = dir.join("cfg.json");
    std::fs::write(&path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    path
}

#[test]
fn gen_stats_and_filter() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.graphs.jsonl");
    let out = skelbridge(&["gen", "--kind", "community-small", "--count", "6", "--seed", "3", "--out", p(&data)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(std::fs::read_to_string(&data).unwrap().lines().count(), 6);

    let out = skelbridge(&["stats", "--input", p(&data)]);
    assert!(out.status.success());
    let table = stdout(&out);
    assert!(table.contains("2-simplices") && table.contains("cells(l<=8)"), "{table}");

    let out = skelbridge(&["stats", "--input", p(&data), "--json", "--max-p", "2"]);
    let stats: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stats["graphs"], 6);
    assert_eq!(stats["simplices"].as_array().unwrap().len(), 1);

    let filtered = dir.path().join("f.graphs.jsonl");
    let out = skelbridge(&["filter", "--input", p(&data), "--kind", "simplex", "--p", "2", "--output", p(&filtered)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).starts_with("kept "));
    assert_eq!(std::fs::read_to_string(&filtered).unwrap().lines().count(), 6);
}

#[test]
fn eval_of_identical_sets_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.graphs.jsonl");
    assert!(skelbridge(&["gen", "--kind", "sbm", "--count", "3", "--out", p(&data)]).status.success());
    let report = dir.path().join("r.json");
    let out = skelbridge(&["eval", "--generated", p(&data), "--reference", p(&data), "--out", p(&report)]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    for key in ["degree", "clustering", "orbit", "spectral", "average"] {
        assert_eq!(r[key], 0.0, "{key}");
    }
}

#[test]
fn train_sample_and_manifests() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let run = dir.path().join("run");
    let out = skelbridge(&["train", "--config", p(&cfg), "--out-dir", p(&run)]);
    assert!(out.status.success(), "{}", stderr(&out));
    for f in ["segment_1.ckpt", "segment_2.ckpt", "losses.json", "config.json", "manifest.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 0);
    assert_eq!(manifest["config_hash"].as_str().unwrap().len(), 64);
    assert!(manifest["files"]["segment_1.ckpt"].is_string());

    let samples = dir.path().join("gen.graphs.jsonl");
    let out = skelbridge(&["sample", "--config", p(&cfg), "--ckpt-dir", p(&run), "--out", p(&samples)]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stdout(&out).contains("failed)"));
    assert!(dir.path().join("gen.graphs.jsonl.manifest.json").exists());

    let out = skelbridge(&["sample", "--config", p(&cfg), "--ckpt-dir", p(dir.path()), "--out", p(&samples)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    assert_eq!(skelbridge(&["stats", "--input", p(&missing)]).status.code(), Some(2));

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    assert_eq!(skelbridge(&["stats", "--input", p(&empty)]).status.code(), Some(2));

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"version\":1,\"id\":\"x\",\"n\":2,\"edges\":[[0,0,1]]}\n").unwrap();
    let out = skelbridge(&["stats", "--input", p(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 1"));

    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, "{\"version\": 1, \"unknown\": true}").unwrap();
    assert_eq!(skelbridge(&["train", "--config", p(&cfg), "--out-dir", p(dir.path())]).status.code(), Some(2));

    assert_eq!(skelbridge(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(skelbridge(&["--help"]).status.code(), Some(0));
    assert_eq!(skelbridge(&["--threads", "0", "verify", "--suite", "topology"]).status.code(), Some(2));
}

#[test]
fn divergence_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = tiny_config(dir.path());
    let mut v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cfg).unwrap()).unwrap();
    v["train"]["lr"] = 1e300.into();
    v["train"]["grad_clip"] = 1e9.into();
    std::fs::write(&cfg, v.to_string()).unwrap();
    let out = skelbridge(&["train", "--config", p(&cfg), "--out-dir", p(&dir.path().join("run"))]);
    assert_eq!(out.status.code(), Some(3), "{}", stderr(&out));
}

#[test]
fn verify_reports_injected_fault() {
    let out = skelbridge(&["verify", "--suite", "topology"]);
    assert!(out.status.success(), "{}", stdout(&out));
    let out = skelbridge(&["verify", "--suite", "sde", "--inject-fault", "drift-sign"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stdout(&out).contains("FAIL sde.drift_identity"));
    assert!(stderr(&out).contains("sde.drift_identity"));
}
