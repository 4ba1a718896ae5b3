use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_fairbench");
const SMALL: &[&str] = &["--dataset", "synthetic", "--n", "400", "--hidden", "8"];

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn fairbench")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn with_out(base: &[&str], extra: &[&str], out: &Path) -> Vec<String> {
    base.iter()
        .chain(extra)
        .map(|s| s.to_string())
        .chain(["--out".to_string(), out.display().to_string()])
        .collect()
}

fn run_in(base: &[&str], extra: &[&str], out: &Path) -> Output {
    let args = with_out(base, extra, out);
    Command::new(BIN).args(&args).output().expect("spawn fairbench")
}

fn manifest(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

#[test]
fn missing_dataset_is_a_usage_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(&["train"], &[], tmp.path());
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("--dataset"), "{}", stderr(&out));
}

#[test]
fn bad_flags_are_usage_errors() {
    let out = run(&["train", "--dataset", "synthetic", "--bogus", "1"]);
    assert_eq!(code(&out), 2);
    let out = run(&["train", "--dataset", "synthetic", "--lam", "abc"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("abc"), "{}", stderr(&out));
    let out = run(&["train", "--dataset", "synthetic", "--method", "nope"]);
    assert_eq!(code(&out), 2);
    let out = run(&["frobnicate"]);
    assert_eq!(code(&out), 2);
    assert_eq!(code(&run(&["--help"])), 0);
}

#[test]
fn flags_override_config_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("cfg.json");
    fs::write(&cfg, r#"{"method": "diffdp", "lam": 0.5, "steps": 20}"#).unwrap();
    let out = run_in(
        &["train", "--config", cfg.to_str().unwrap(), "--lam", "2.0"],
        SMALL,
        &tmp.path().join("run"),
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = manifest(&tmp.path().join("run"));
    assert_eq!(m["config"]["lam"], 2.0);
    assert_eq!(m["config"]["steps"], 20);
    assert_eq!(m["config"]["method"], "diffdp");

    fs::write(&cfg, r#"{"lamda": 0.5}"#).unwrap();
    let out = run(&["train", "--dataset", "synthetic", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
}

#[test]
fn unwritable_output_is_an_io_error() {
    let tmp = tempfile::tempdir().unwrap();
    let file = tmp.path().join("plain");
    fs::write(&file, "x").unwrap();
    let out = run_in(&["train", "--steps", "10"], SMALL, &file.join("sub"));
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    let out = run(&["train", "--dataset", "x", "--data", "/nonexistent/x.csv", "--schema", "/nonexistent/s.json"]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
}

#[test]
fn diverging_run_is_a_numerical_abort() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(&["train", "--lr", "1e300", "--gamma", "1"], SMALL, tmp.path());
    assert_eq!(code(&out), 4, "{}", stderr(&out));
    let failure = fs::read_to_string(tmp.path().join("failure.json")).unwrap();
    assert!(failure.contains("step"));
    assert!(tmp.path().join("manifest.json").exists());
}

#[test]
fn train_writes_curves_at_every_tenth_step() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(&["train"], SMALL, tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(tmp.path().join("curves.csv")).unwrap();
    let steps: Vec<usize> = rdr.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(steps, (1..=15).map(|k| k * 10).collect::<Vec<_>>());
    let m = manifest(tmp.path());
    for f in ["results.csv", "curves.csv", "params.bin", "summary.json", "config.json"] {
        assert!(m["outputs"][f].is_string(), "{f} missing from manifest");
    }
}

#[test]
fn sweep_reruns_are_byte_identical_and_tradeoff_anchors_erm() {
    let tmp = tempfile::tempdir().unwrap();
    let args = ["sweep", "--method", "diffdp", "--grid", "0.5,2", "--seeds", "0,1", "--steps", "30", "--jobs", "2"];
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for dir in [&a, &b] {
        let out = run_in(&args, SMALL, dir);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
    }
    for f in ["results.csv", "curves.csv", "tradeoff.csv", "controllability.csv", "summary.json", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }

    let out = run(&["tradeoff", "--input", a.join("results.csv").to_str().unwrap(), "--out", tmp.path().join("t").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let mut rdr = csv::Reader::from_path(tmp.path().join("t/tradeoff.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let v: Vec<f64> = (3..7).map(|i| r[i].parse().unwrap()).collect();
        if &r[0] == "erm" {
            assert_eq!(v, vec![1.0; 4]);
        } else {
            assert!(v.iter().all(|x| x.is_finite() && *x > 0.0), "{r:?}");
        }
    }
}

#[test]
fn synth_output_feeds_train_and_preprocess() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run(&["synth", "--n", "300", "--out", tmp.path().join("s").to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let csv = tmp.path().join("s/synthetic.csv");
    let schema = tmp.path().join("s/synthetic.schema.json");
    let data = ["--dataset", "mine", "--data", csv.to_str().unwrap(), "--schema", schema.to_str().unwrap()];

    let out = run_in(&["train", "--hidden", "4", "--steps", "10"], &data, &tmp.path().join("t"));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = manifest(&tmp.path().join("t"));
    assert!(m["inputs"].as_object().unwrap().len() >= 2);

    let out = run_in(&["preprocess"], &data, &tmp.path().join("p"));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    for f in ["train.csv", "test.csv", "preprocessor.json", "manifest.json"] {
        assert!(tmp.path().join("p").join(f).exists(), "{f}");
    }
    let rows = fs::read_to_string(tmp.path().join("p/train.csv")).unwrap().lines().count();
    assert_eq!(rows, 241);
}

#[test]
fn examine_bias_reports_a_verdict() {
    let tmp = tempfile::tempdir().unwrap();
    let out = run_in(&["examine-bias", "--trials", "3", "--steps", "30"], SMALL, tmp.path());
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let summary = fs::read_to_string(tmp.path().join("summary.json")).unwrap();
    assert!(summary.contains("BIASED") || summary.contains("UNSTABLE"));
    let out = run(&["examine-bias", "--dataset", "synthetic", "--method", "diffdp"]);
    assert_eq!(code(&out), 2);
}
