//! End-to-end tests of the `gfml` binary: exit codes, file outputs, and
//! reproducibility of the train subcommand.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gfml"))
}

fn master_fml() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../assets/master.fml")
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn assert_code(output: &Output, code: i32) {
    assert_eq!(
        output.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn validate_shipped_master_succeeds() {
    let out = run(&["validate", master_fml().to_str().unwrap()]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("OK"), "{stdout}");
    assert!(stdout.contains("144 rules"), "{stdout}");
}

#[test]
fn validate_reports_domain_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.fml");
    std::fs::write(&bad, "<FuzzyController><oops/>").unwrap();
    assert_code(&run(&["validate", bad.to_str().unwrap()]), 1);
    assert_code(
        &run(&["validate", dir.path().join("missing.fml").to_str().unwrap()]),
        2,
    );
}

#[test]
fn unknown_flag_is_usage_error() {
    assert_code(&run(&["validate", "--frobnicate", "x"]), 2);
}

#[test]
fn bad_thread_cap_is_usage_error() {
    let out = bin()
        .env("GFML_THREADS", "zero")
        .args(["validate", master_fml().to_str().unwrap()])
        .output()
        .unwrap();
    assert_code(&out, 2);
    let ok = bin()
        .env("GFML_THREADS", "4")
        .args(["validate", master_fml().to_str().unwrap()])
        .output()
        .unwrap();
    assert_code(&ok, 0);
}

#[test]
fn infer_prints_crisp_output() {
    let out = run(&[
        "infer",
        master_fml().to_str().unwrap(),
        "--dbsn",
        "0.9",
        "--dwsn",
        "0.1",
        "--dbwr",
        "0.9",
        "--dwwr",
        "0.1",
        "--dbtmr",
        "0.9",
        "--dwtmr",
        "0.9",
    ]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    let value: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("output: "))
        .expect("output line")
        .parse()
        .unwrap();
    assert!((value - 0.87333).abs() < 1e-3, "{value}");
}

#[test]
fn gen_master_matches_shipped_asset() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("master.fml");
    assert_code(&run(&["gen-master", "--out", out_path.to_str().unwrap()]), 0);
    assert_eq!(
        std::fs::read(&out_path).unwrap(),
        std::fs::read(master_fml()).unwrap(),
        "generated master must be byte-identical to the shipped asset"
    );
}

#[test]
fn synthetic_evaluate_curves_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert_code(
        &run(&[
            "gen-synthetic",
            "--fml",
            master_fml().to_str().unwrap(),
            "--games",
            "60",
            "--moves",
            "3",
            "--seed",
            "5",
            "--samples",
            "200",
            "--out",
            data.to_str().unwrap(),
        ]),
        0,
    );

    // The generating controller must score zero MSE on its own labels.
    let eval = run(&[
        "evaluate",
        "--fml",
        master_fml().to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--side",
        "black",
        "--samples",
        "200",
        "--csv",
    ]);
    assert_code(&eval, 0);
    let stdout = String::from_utf8_lossy(&eval.stdout);
    let mut lines = stdout.lines();
    assert_eq!(lines.next(), Some("split,records,mse"));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), 3);
        let mse: f64 = cells[2].parse().unwrap();
        assert!(mse < 1e-12, "{line}");
    }
    assert!(stdout.contains("train,135,"), "{stdout}");
    assert!(stdout.contains("test,45,"), "{stdout}");
    assert!(stdout.contains("overall,180,"), "{stdout}");

    let curves = run(&[
        "curves",
        "--fml",
        master_fml().to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--game",
        "7",
        "--side",
        "black",
        "--samples",
        "200",
    ]);
    assert_code(&curves, 0);
    let stdout = String::from_utf8_lossy(&curves.stdout);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "move_no,predicted,desired,darkforest");
    assert_eq!(lines.len(), 4, "header plus one row per move");
    for row in &lines[1..] {
        let cells: Vec<&str> = row.split(',').collect();
        let predicted: f64 = cells[1].parse().unwrap();
        let desired: f64 = cells[2].parse().unwrap();
        assert!((predicted - desired).abs() < 1e-12, "{row}");
    }

    // Asking for a game that is not in the file is a domain error.
    assert_code(
        &run(&[
            "curves",
            "--fml",
            master_fml().to_str().unwrap(),
            "--data",
            data.to_str().unwrap(),
            "--game",
            "99",
            "--side",
            "black",
        ]),
        1,
    );
}

#[test]
fn train_is_reproducible_and_writes_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    assert_code(
        &run(&[
            "gen-synthetic",
            "--fml",
            master_fml().to_str().unwrap(),
            "--games",
            "50",
            "--moves",
            "2",
            "--seed",
            "11",
            "--noise",
            "0.05",
            "--samples",
            "100",
            "--out",
            data.to_str().unwrap(),
        ]),
        0,
    );

    let train_once = |tag: &str| -> (Vec<u8>, Vec<u8>, serde_json::Value) {
        let fml = dir.path().join(format!("learned-{tag}.fml"));
        let history = dir.path().join(format!("history-{tag}.csv"));
        let manifest = dir.path().join(format!("manifest-{tag}.json"));
        let out = run(&[
            "train",
            "--data",
            data.to_str().unwrap(),
            "--side",
            "black",
            "--template",
            master_fml().to_str().unwrap(),
            "--seed",
            "17",
            "--generations",
            "5",
            "--population",
            "8",
            "--samples",
            "100",
            "--out-fml",
            fml.to_str().unwrap(),
            "--out-history",
            history.to_str().unwrap(),
            "--out-manifest",
            manifest.to_str().unwrap(),
        ]);
        assert_code(&out, 0);
        (
            std::fs::read(&fml).unwrap(),
            std::fs::read(&history).unwrap(),
            serde_json::from_slice(&std::fs::read(&manifest).unwrap()).unwrap(),
        )
    };
    let (fml_a, history_a, manifest_a) = train_once("a");
    let (fml_b, history_b, _) = train_once("b");
    assert_eq!(fml_a, fml_b, "same seed must give byte-identical output");
    assert_eq!(history_a, history_b);

    assert_eq!(manifest_a["command"], "train");
    assert_eq!(manifest_a["seed"], 17);
    assert_eq!(manifest_a["config"]["generations"], 5);
    assert_eq!(manifest_a["tool_version"], env!("CARGO_PKG_VERSION"));
    let digest = manifest_a["inputs"][0]["sha256"].as_str().unwrap();
    assert_eq!(digest.len(), 64);
    assert!(digest.chars().all(|c| c.is_ascii_hexdigit()));
    assert!(manifest_a["duration_seconds"].as_f64().unwrap() >= 0.0);

    let history_text = String::from_utf8(history_a).unwrap();
    let mut lines = history_text.lines();
    assert_eq!(lines.next(), Some("generation,best_mse,mean_mse"));
    assert_eq!(lines.count(), 6, "generation 0 plus 5 evolved generations");

    // The learned controller must itself be a valid FML document.
    let learned = dir.path().join("learned-a.fml");
    std::fs::write(&learned, fml_a).unwrap();
    assert_code(&run(&["validate", learned.to_str().unwrap()]), 0);
}

#[test]
fn rollout_ttt_writes_replayable_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("trace.jsonl");
    let out = run(&[
        "rollout-ttt",
        "--depth",
        "9",
        "--out",
        out_path.to_str().unwrap(),
    ]);
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 9, "perfect play fills the board");
    for line in &lines {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["state"].is_string());
        assert!(v["chosen_move"].is_string());
        assert!(v["alternatives"].is_array());
    }
    assert!(
        String::from_utf8_lossy(&out.stderr).contains("Draw"),
        "perfect self-play must draw"
    );

    // Explicit choice indices drive a different, shorter game.
    let quick = run(&["rollout-ttt", "--depth", "9", "--choice", "0,0,1,0,2"]);
    assert_code(&quick, 0);

    // Malformed choice string is a usage error.
    assert_code(&run(&["rollout-ttt", "--depth", "2", "--choice", "x,y"]), 2);
}
