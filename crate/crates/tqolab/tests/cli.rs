use std::fs;
use std::path::Path;

use assert_cmd::Command;
use tempfile::TempDir;
use tqolab_core::models::{build_toric_code, save_model};

fn tqolab() -> Command {
    let mut c = Command::cargo_bin("tqolab").unwrap();
    c.env_remove("TQOLAB_CACHE_DIR");
    c
}

fn scenario(dir: &TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, text).unwrap();
    p
}

fn read_json(p: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(p).unwrap()).unwrap()
}

const SPECTRUM: &str = r#"
[experiment]
kind = "spectrum"

[model]
builtin = "toric-code"
L = 2
"#;

#[test]
fn spectrum_run_writes_all_artifacts() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "s.toml", SPECTRUM);
    let out = dir.path().join("out");
    tqolab().args(["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]).assert().success();
    for f in ["manifest.json", "results.csv", "bands.json", "scoreboard.json", "summary.txt"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let csv = fs::read_to_string(out.join("results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("index,eigenvalue,band"));
    let eigs: Vec<f64> = lines.map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(eigs.len(), 256);
    assert!(eigs.iter().all(|e| (e - e.round()).abs() < 1e-9));
    let bands = read_json(&out.join("bands.json"));
    assert_eq!(bands["bands"]["bands"][0]["count"], 4);
    assert!(bands["bands"]["delta0"].as_f64().unwrap() < 1e-12);
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["status"], "ok");
    assert_eq!(manifest["scenario"]["solver"]["lanczos_tol"], 1e-9);
}

#[test]
fn malformed_config_names_the_field() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "bad.toml", "[experiment]\nkind = \"spectrum\"\n[perturbation]\nkind = \"field\"\nh = 1.5\n");
    tqolab()
        .args(["run", sc.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .assert()
        .code(1)
        .stderr(predicates::str::contains("perturbation.h"));
    let typo = scenario(&dir, "typo.toml", "[experiment]\nkind = \"spectrum\"\n[solver]\neigen_values = 3\n");
    tqolab()
        .args(["run", typo.to_str().unwrap()])
        .assert()
        .code(1)
        .stderr(predicates::str::contains("eigen_values"));
}

#[test]
fn oversized_model_is_a_resource_error() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(&dir, "big.toml", "[experiment]\nkind = \"spectrum\"\n[model]\nbuiltin = \"toric-code\"\nL = 4\n");
    let out = dir.path().join("o");
    tqolab().args(["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]).assert().code(3);
    assert_eq!(read_json(&out.join("manifest.json"))["status"], "resource");
}

#[test]
fn closing_gap_aborts_the_flow() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(
        &dir,
        "gap.toml",
        "[experiment]\nkind = \"flow-audit\"\n[perturbation]\nkind = \"field\"\nh = 0.9\n",
    );
    tqolab()
        .args(["run", sc.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()])
        .assert()
        .code(2)
        .stderr(predicates::str::contains("at s ="));
}

#[test]
fn validate_accepts_a_model_file_and_rejects_garbage() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("toric.model");
    save_model(&build_toric_code(2).unwrap(), &p).unwrap();
    tqolab()
        .args(["validate", p.to_str().unwrap()])
        .assert()
        .success()
        .stdout(predicates::str::contains("ground degeneracy 4"));
    let bad = dir.path().join("bad.model");
    fs::write(&bad, "not a model\n").unwrap();
    tqolab().args(["validate", bad.to_str().unwrap()]).assert().code(1);
}

#[test]
fn suite_on_ising_marks_dependent_stages() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(
        &dir,
        "ising.toml",
        "[experiment]\nkind = \"spectrum\"\n[model]\nbuiltin = \"ising\"\nL = 2\ndim = 2\n[perturbation]\nkind = \"field\"\nh = 0.05\n",
    );
    let out = dir.path().join("o");
    tqolab().args(["suite", sc.to_str().unwrap(), "--out", out.to_str().unwrap()]).assert().success();
    let board = read_json(&out.join("scoreboard.json"));
    let status = |name: &str| {
        board["stages"].as_array().unwrap().iter().find(|s| s["name"] == name).unwrap()["status"].as_str().unwrap().to_string()
    };
    assert_eq!(status("model"), "pass");
    assert_eq!(status("tqo"), "fail");
    for s in ["samespace", "commutator", "rewrite", "decomposition", "relative-bound", "band-containment"] {
        assert_eq!(status(s), "not-applicable", "{s}");
    }
}

#[test]
fn reruns_are_bit_identical_across_thread_counts() {
    let dir = TempDir::new().unwrap();
    let sc = scenario(
        &dir,
        "gp.toml",
        "[experiment]\nkind = \"gap-path\"\n[perturbation]\nkind = \"random\"\nJ = 0.03\n[path]\npoints = 6\n",
    );
    let mut outs = Vec::new();
    for threads in ["1", "2", "1"] {
        let out = dir.path().join(format!("o{}", outs.len()));
        tqolab()
            .args(["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap(), "--threads", threads, "--seed", "11"])
            .assert()
            .success();
        outs.push(fs::read(out.join("results.csv")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    assert_eq!(outs[0], outs[2]);
}

#[test]
fn cache_directory_is_used() {
    let dir = TempDir::new().unwrap();
    let text = format!("{SPECTRUM}\n[perturbation]\nkind = \"field\"\nh = 0.05\n");
    let sc = scenario(&dir, "s.toml", &text);
    let cache = dir.path().join("cache");
    let mut hits = Vec::new();
    for i in 0..2 {
        let out = dir.path().join(format!("o{i}"));
        tqolab()
            .env("TQOLAB_CACHE_DIR", &cache)
            .args(["run", sc.to_str().unwrap(), "--out", out.to_str().unwrap()])
            .assert()
            .success();
        hits.push(read_json(&out.join("manifest.json"))["cache_hits"].as_u64().unwrap());
    }
    // perturbed spectrum plus unperturbed levels
    assert_eq!(hits, [0, 2]);
    assert!(fs::read_dir(&cache).unwrap().count() > 0);
}
