use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use cxr_regions::io::save_mask;
use cxr_regions::BinaryMask;

fn cli(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cxr-regions"))
        .args(args)
        .current_dir(cwd)
        .output()
        .unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(cli(&["frobnicate"], tmp.path()).status.code(), Some(2));
    assert_eq!(cli(&[], tmp.path()).status.code(), Some(2));
    let bad = cli(&["--spine-side", "up", "phantom", "--n", "1"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
    let bad = cli(&["--tiles", "8by8", "phantom"], tmp.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn phantom_then_run() {
    let tmp = tempfile::tempdir().unwrap();
    let p = cli(&["phantom", "--n", "3", "--seed", "5", "--out-dir", "corpus"], tmp.path());
    assert!(p.status.success(), "{}", String::from_utf8_lossy(&p.stderr));
    let r = cli(&["--jobs", "2", "run", "corpus/manifest.json", "--out-dir", "res"], tmp.path());
    assert_eq!(r.status.code(), Some(0), "{}", String::from_utf8_lossy(&r.stderr));
    let stdout = String::from_utf8(r.stdout).unwrap();
    assert_eq!(stdout.lines().count(), 3);
    assert!(tmp.path().join("res/results.json").is_file());
    assert!(tmp.path().join("res/case002/case002_LATMM.png").is_file());
}

#[test]
fn failed_case_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("m.json"), r#"[{"case_id": "x", "ap_image": "missing.png"}]"#).unwrap();
    let r = cli(&["run", "m.json"], tmp.path());
    assert_eq!(r.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&r.stdout).contains("MissingInput"));
}

#[test]
fn evaluate_identical_pair() {
    let tmp = tempfile::tempdir().unwrap();
    let m = BinaryMask::from_fn(32, 32, |x, y| (4..20).contains(&x) && (8..30).contains(&y)).unwrap();
    save_mask(&m, tmp.path().join("a.png")).unwrap();
    let r = cli(
        &["--resize-metrics", "native", "evaluate", "--pred", "a.png", "--ref", "a.png", "--out-dir", "ev"],
        tmp.path(),
    );
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("ev/metrics.json")).unwrap()).unwrap();
    assert_eq!(report["summary"]["dice"]["mean"], 1.0);
    assert_eq!(report["summary"]["asd"]["mean"], 0.0);
    let csv = fs::read_to_string(tmp.path().join("ev/metrics.csv")).unwrap();
    assert!(csv.starts_with("case,DICE,PRC,RCL,ASD"));
}

#[test]
fn enhance_and_orient() {
    let tmp = tempfile::tempdir().unwrap();
    let p = cli(&["phantom", "--n", "1", "--out-dir", "c"], tmp.path());
    assert!(p.status.success());
    let e = cli(&["enhance", "c/case001/ap.png", "enh.png", "--znorm", "z.json"], tmp.path());
    assert!(e.status.success(), "{}", String::from_utf8_lossy(&e.stderr));
    assert!(tmp.path().join("enh.png").is_file());
    let z: serde_json::Value = serde_json::from_str(&fs::read_to_string(tmp.path().join("z.json")).unwrap()).unwrap();
    assert_eq!(z["width"], 256);

    let o = cli(
        &["orient", "--image", "c/case001/lat.png", "--mask", "c/case001/lat_mask.png", "--out-dir", "o"],
        tmp.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(tmp.path().join("o/oriented.png").is_file());

    let c = cli(
        &["--margin", "0.1", "crop", "--image", "c/case001/ap.png", "--mask", "c/case001/ap_mask.png", "--out-dir", "k"],
        tmp.path(),
    );
    assert!(c.status.success(), "{}", String::from_utf8_lossy(&c.stderr));
    assert!(tmp.path().join("k/crop_mask.png").is_file());
}
