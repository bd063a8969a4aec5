use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;

use serde_json::{json, Value};
use shmked_cli::manifest::{hash_file, Manifest};
use shmked_cli::{CliError, Method, Outcome, Stage, Workspace};

fn tiny_config() -> Value {
    json!({
        "seed": 7,
        "grid": { "nx": 8, "ny": 8, "nz": 1, "dx": 50.0, "dy": 50.0, "dz": [4.0] },
        "prior": {
            "kind": "channel", "count": 1, "width": 2, "amplitude": 1.5, "period": 8.0,
            "channel_level": 6.0, "background_level": 3.5
        },
        "library_size": 12,
        "ensemble_size": 4,
        "lnk_bounds": [1.0, 8.5],
        "flow": {
            "wells": [
                { "name": "P1", "perforations": [[5, 5, 0]], "control": { "type": "producer", "rate": 20.0 } }
            ],
            "boundary": { "faces": ["west"], "pressure_bar": 250.0 },
            "numerics": { "initial_pressure_bar": 250.0 }
        },
        "schedule": {
            "report_times": [60, 120, 180, 240, 300, 360],
            "survey_times": [180],
            "history_end": 300
        },
        "assimilation": { "mda": { "alphas": [2, 2] } },
        "dictionary": { "atoms": 8, "sparsity": 2, "sweeps": 2 },
        "dct": { "rule": "keep-k", "k": 6 }
    })
}

fn write_config(dir: &Path, cfg: &Value) -> PathBuf {
    let path = dir.join("run.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn shmked(config: &Path, out: &Path, args: &[&str]) -> (i32, String) {
    let output = Command::new(env!("CARGO_BIN_EXE_shmked"))
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(args)
        .output()
        .unwrap();
    (output.status.code().unwrap(), String::from_utf8_lossy(&output.stderr).into_owned())
}

fn manifests(root: &Path) -> BTreeMap<String, String> {
    Stage::ALL
        .iter()
        .filter_map(|s| {
            let p = root.join(s.dir_name()).join("manifest.json");
            p.exists().then(|| (s.dir_name().to_string(), std::fs::read_to_string(p).unwrap()))
        })
        .collect()
}

#[test]
fn assimilate_without_truth_names_missing_stages() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &tiny_config());
    let out = tmp.path().join("out");
    let (code, err) = shmked(&config, &out, &["assimilate", "--method", "esmda"]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("run-truth"), "{err}");
    assert!(err.contains("generate-prior"), "{err}");
    assert!(!out.join("esmda").exists());
}

#[test]
fn invalid_config_lists_every_problem() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny_config();
    cfg["ensemble_size"] = json!(30);
    cfg["assimilation"]["mda"]["alphas"] = json!([2, 3]);
    cfg["dictionary"]["sweeps"] = json!(0);
    let config = write_config(tmp.path(), &cfg);
    let (code, err) = shmked(&config, &tmp.path().join("out"), &["validate"]);
    assert_eq!(code, 2, "{err}");
    assert_eq!(err.lines().filter(|l| l.starts_with("  - ")).count(), 3, "{err}");
    assert!(err.contains("ensemble size 30"), "{err}");
    assert!(err.contains("sweep"), "{err}");
}

#[test]
fn unparsable_config_and_zero_threads_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("broken.json");
    std::fs::write(&config, "{ \"seed\": 1, ").unwrap();
    assert_eq!(shmked(&config, &tmp.path().join("out"), &["validate"]).0, 2);

    let config = write_config(tmp.path(), &tiny_config());
    let (code, err) = shmked(&config, &tmp.path().join("out"), &["validate"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(shmked(&config, &tmp.path().join("out"), &["--threads", "0", "generate-prior"]).0, 2);
}

#[test]
fn rerun_is_up_to_date_and_force_reproduces_artifacts() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &tiny_config());
    let out = tmp.path().join("out");
    let (code, err) = shmked(&config, &out, &["run"]);
    assert_eq!(code, 0, "{err}");
    let first = manifests(&out);
    assert_eq!(first.len(), Stage::ALL.len());
    assert!(out.join("plots").join("rmse.svg").exists());

    let (code, err) = shmked(&config, &out, &["run"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(err.matches("up to date").count(), Stage::ALL.len(), "{err}");
    assert_eq!(manifests(&out), first);

    let (code, err) = shmked(&config, &out, &["--force", "run"]);
    assert_eq!(code, 0, "{err}");
    assert!(!err.contains("up to date"), "{err}");
    assert_eq!(manifests(&out), first);

    // A new seed invalidates every stage.
    let (code, err) = shmked(&config, &out, &["--seed", "8", "generate-prior"]);
    assert_eq!(code, 0, "{err}");
    assert_ne!(manifests(&out)["prior"], first["prior"]);
}

#[test]
fn tampered_artifact_reruns_the_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &tiny_config());
    let ws = Workspace::open(&config, None, Some(&tmp.path().join("out")), false).unwrap();
    assert_eq!(ws.run(Stage::GeneratePrior).unwrap(), Outcome::Ran);
    let csv = ws.dir(Stage::GeneratePrior).join("library.csv");
    let original = std::fs::read(&csv).unwrap();
    std::fs::write(&csv, b"junk").unwrap();
    assert!(matches!(ws.run(Stage::LearnDict), Err(CliError::Dependency { .. })));
    assert_eq!(ws.run(Stage::GeneratePrior).unwrap(), Outcome::Ran);
    assert_eq!(std::fs::read(&csv).unwrap(), original);
}

#[test]
fn plot_of_empty_ensemble_fails_without_partial_output() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), &tiny_config());
    let ws = Workspace::open(&config, None, Some(&tmp.path().join("out")), false).unwrap();
    for stage in [
        Stage::GeneratePrior,
        Stage::LearnDict,
        Stage::RunTruth,
        Stage::Assimilate(Method::Esmda),
        Stage::Assimilate(Method::ShmKed),
        Stage::Report,
    ] {
        ws.run(stage).unwrap();
    }
    // Drop every esmda member from the series and re-seal the manifest.
    let report = ws.dir(Stage::Report);
    let series = report.join("well_series.csv");
    let kept: String = std::fs::read_to_string(&series)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with("esmda,"))
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&series, kept).unwrap();
    let mut manifest = Manifest::read(&report).unwrap().unwrap();
    manifest.artifacts.insert("well_series.csv".into(), hash_file(&series).unwrap());
    manifest.write(&report).unwrap();

    let err = ws.run(Stage::Plot).unwrap_err();
    assert_eq!(err.exit_code(), 1);
    assert!(err.to_string().contains("empty ensemble"), "{err}");
    let leftovers: Vec<_> = std::fs::read_dir(ws.dir(Stage::Report).parent().unwrap())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.contains("plots"))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}
