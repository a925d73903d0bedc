use std::path::{Path, PathBuf};
use std::process::Command;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn convint(args: &[&str], config: &Path, out: &Path) -> (i32, String, String) {
    let o = Command::new(env!("CARGO_BIN_EXE_convint"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into(),
        String::from_utf8_lossy(&o.stderr).into(),
    )
}

fn edited(from: &str, dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(configs().join(from)).unwrap();
    let p = dir.join(from);
    std::fs::write(&p, edit(text)).unwrap();
    p
}

fn json(p: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn admissible_tuple_passes_and_reference_tuple_fails() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = convint(
        &["params-check"],
        &configs().join("admissible.toml"),
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    assert!(dir.path().join("params_ledger.csv").exists());

    let (code, _, err) = convint(
        &["params-check"],
        &configs().join("reference.toml"),
        dir.path(),
    );
    assert_eq!(code, 1);
    assert!(err.contains("ell_scale_gap"), "{err}");
    let rep = json(&dir.path().join("params_report.json"));
    let rows = rep["rows"].as_array().unwrap();
    let global_gap = rows
        .iter()
        .find(|r| r["id"] == "alpha*b>=10/iota-4")
        .unwrap();
    assert_eq!(global_gap["pass"], false);
}

#[test]
fn malformed_exact_tuples_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let b6 = edited("reference.toml", dir.path(), |t| {
        t.replace("b = 7", "b = 6")
    });
    let (code, _, err) = convint(&["params-check"], &b6, dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("multiple of 7"), "{err}");

    let no_alpha = edited("reference.toml", dir.path(), |t| {
        t.replace("alpha = 1e-4\n", "")
    });
    let (code, _, err) = convint(&["params-check"], &no_alpha, dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("alpha"), "{err}");
}

#[test]
fn iterate_then_verify_from_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("desk.toml");
    let (code, _, err) = convint(&["iterate"], &cfg, dir.path());
    assert_eq!(code, 0, "{err}");
    for f in [
        "ledger.csv",
        "ledger.json",
        "report.json",
        "checkpoints/level_1_velocity.bin",
        "checkpoints/weak_series.json",
    ] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let ledger = json(&dir.path().join("ledger.json"));
    let complete = ledger["levels"]["global"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["id"] == "ledger_complete")
        .unwrap();
    assert_eq!(complete["pass"], true);

    let (code, out, err) = convint(&["verify"], &cfg, dir.path());
    assert_eq!(code, 0, "{err}");
    assert!(out.contains("weak_residual"));
    let rep = json(&dir.path().join("verify_report.json"));
    assert_eq!(rep["hard_failures"], 0);
}

#[test]
fn verify_without_checkpoints_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, _) = convint(&["verify"], &configs().join("desk.toml"), dir.path());
    assert_eq!(code, 2);
    let (code, _, err) = convint(&["consistency"], &configs().join("desk.toml"), dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("[consistency]"), "{err}");
}

#[test]
fn consistency_with_agreeing_energies() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = convint(
        &["consistency"],
        &configs().join("consistency.toml"),
        dir.path(),
    );
    assert_eq!(code, 0, "{err}");
    let rep = json(&dir.path().join("consistency_report.json"));
    let runs = rep["runs"].as_array().unwrap();
    assert_eq!(runs.len(), 2);
    // the energies part after t_agree, and that shows up in the iterates
    let later: u64 = runs
        .iter()
        .flat_map(|r| r["levels"].as_array().unwrap())
        .map(|l| l["differing_after"].as_u64().unwrap())
        .sum();
    assert!(later > 0);
}

#[test]
fn consistency_rejects_energies_that_differ_early() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = edited("consistency.toml", dir.path(), |t| {
        t.replace("start = 0.03125", "start = 0.0")
    });
    let (code, _, err) = convint(&["consistency"], &cfg, dir.path());
    assert_eq!(code, 2);
    assert!(err.contains("differ"), "{err}");
}

#[test]
fn ledger_is_identical_across_worker_counts() {
    let cfg = configs().join("desk.toml");
    let runs: Vec<String> = [1, 3]
        .iter()
        .map(|w| {
            let dir = tempfile::tempdir().unwrap();
            let o = Command::new(env!("CARGO_BIN_EXE_convint"))
                .args(["iterate", "--workers", &w.to_string(), "--config"])
                .arg(&cfg)
                .arg("--out")
                .arg(dir.path())
                .output()
                .unwrap();
            assert_eq!(o.status.code(), Some(0));
            std::fs::read_to_string(dir.path().join("ledger.csv")).unwrap()
        })
        .collect();
    assert_eq!(runs[0], runs[1]);
}
