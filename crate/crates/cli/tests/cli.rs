use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn polyrep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_polyrep"))
        .args(args)
        .env("POLYREP_THREADS", "2")
        .output()
        .expect("run polyrep")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn generate(dir: &Path, seed: u64, frames: usize) -> PathBuf {
    let out = dir.join(format!("corpus-{seed}-{frames}"));
    let r = polyrep(&[
        "generate",
        "--seed",
        &seed.to_string(),
        "--frames",
        &frames.to_string(),
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn tree(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let path = e.unwrap().path();
        let name = PathBuf::from(path.file_name().unwrap());
        if path.is_dir() {
            out.extend(tree(&path).into_iter().map(|(p, b)| (name.join(p), b)));
        } else {
            out.push((name, fs::read(&path).unwrap()));
        }
    }
    out.sort();
    out
}

#[test]
fn generate_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let ca = generate(a.path(), 42, 6);
    let cb = generate(b.path(), 42, 6);
    assert_eq!(tree(&ca), tree(&cb));
    assert!(ca.join("corpus.json").is_file() && ca.join("config-echo.json").is_file());
    let echo = read_json(&ca.join("config-echo.json"));
    assert_eq!(echo["command"], "generate");
    assert!(echo["args"].get("out").is_none());
}

#[test]
fn generate_zero_frames_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = polyrep(&["generate", "--frames", "0", "--out", p(dir.path())]);
    assert_eq!(code(&r), 2);
}

#[test]
fn upper_bound_csv_header() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 1, 4);
    let out = dir.path().join("ub");
    let r = polyrep(&["upper-bound", "--corpus", p(&corpus), "--out", p(&out)]);
    assert_eq!(code(&r), 0);
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert_eq!(
        csv.lines().next().unwrap(),
        "Representation,BoundingBox,RotatedBox,P12,P24,P36,P60,P120"
    );
    let values: Vec<f64> = csv
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .skip(1)
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(values.len(), 7);
    assert!(values.iter().all(|v| (0.0..=1.0).contains(v)));
    assert!(out.join("report.json").is_file());
}

#[test]
fn upper_bound_on_empty_corpus_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("corpus.json"),
        r#"{"schemaVersion": 1, "frames": []}"#,
    )
    .unwrap();
    let r = polyrep(&[
        "upper-bound",
        "--corpus",
        p(dir.path()),
        "--out",
        p(&dir.path().join("ub")),
    ]);
    assert_eq!(code(&r), 3);
}

fn convert(corpus: &Path, to: &str, out: &Path) -> PathBuf {
    let r = polyrep(&[
        "convert",
        "--corpus",
        p(corpus),
        "--to",
        to,
        "--out",
        p(out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    out.join("predictions.json")
}

fn eval_map(corpus: &Path, pred: &Path, mode: &str, out: &Path, extra: &[&str]) -> Value {
    let mut args = vec![
        "eval",
        "--truth",
        p(corpus),
        "--pred",
        p(pred),
        "--mode",
        mode,
        "--out",
        p(out),
    ];
    args.extend_from_slice(extra);
    let r = polyrep(&args);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    read_json(&out.join("report.json"))["report"].take()
}

#[test]
fn converted_truth_scores_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 5, 6);
    for to in ["box", "obox", "ellipse", "polygon"] {
        let pred = convert(&corpus, to, &dir.path().join(format!("pred-{to}")));
        let preds = read_json(&pred);
        assert!(preds["detections"]
            .as_array()
            .unwrap()
            .iter()
            .all(|d| d["confidence"] == 1.0));
        let out = dir.path().join(format!("eval-{to}"));
        let report = eval_map(&corpus, &pred, "repVsRep", &out, &["--overlays"]);
        assert_eq!(report["mAP"], 1.0, "{to}");
        assert!(out.join("report.csv").is_file());
        assert!(out.join("overlays").join("frame-000000.svg").is_file());
    }
}

#[test]
fn boxes_lose_against_instances() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 8, 6);
    let pred = convert(&corpus, "box", &dir.path().join("pred"));
    let rep = eval_map(&corpus, &pred, "repVsRep", &dir.path().join("a"), &[]);
    let inst = eval_map(&corpus, &pred, "repVsInstance", &dir.path().join("b"), &[]);
    assert!(inst["mAP"].as_f64().unwrap() < rep["mAP"].as_f64().unwrap());
}

#[test]
fn empty_predictions_score_zero() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 2, 3);
    let pred = dir.path().join("empty.json");
    fs::write(&pred, r#"{"schemaVersion": 1, "detections": []}"#).unwrap();
    let report = eval_map(&corpus, &pred, "repVsRep", &dir.path().join("e"), &[]);
    assert_eq!(report["mAP"], 0.0);
    let instances: usize = fs::read_dir(corpus.join("frames"))
        .unwrap()
        .map(|f| {
            read_json(&f.unwrap().path())["instances"]
                .as_array()
                .unwrap()
                .len()
        })
        .sum();
    let missed: u64 = report["counts"]
        .as_object()
        .unwrap()
        .values()
        .map(|c| c["fn"].as_u64().unwrap())
        .sum();
    assert_eq!(missed as usize, instances);
}

#[test]
fn schema_error_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 2, 3);
    let pred = dir.path().join("bad.json");
    fs::write(
        &pred,
        r#"{"schemaVersion": 1, "detections": [{"id": 0, "frameId": "000000", "class": "vehicle",
            "confidence": "sure", "representation": {"type": "box", "cx": 1, "cy": 1, "w": 1, "h": 1}}]}"#,
    )
    .unwrap();
    let r = polyrep(&[
        "eval",
        "--truth",
        p(&corpus),
        "--pred",
        p(&pred),
        "--out",
        p(&dir.path().join("e")),
    ]);
    assert_eq!(code(&r), 3);
    assert!(String::from_utf8_lossy(&r.stderr).contains("detections[0].confidence"));
}

#[test]
fn convert_rejects_too_few_points() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = generate(dir.path(), 2, 3);
    let r = polyrep(&[
        "convert",
        "--corpus",
        p(&corpus),
        "--to",
        "polygon",
        "--points",
        "2",
        "--out",
        p(&dir.path().join("c")),
    ]);
    assert_eq!(code(&r), 2);
}

#[test]
fn loss_check_passes() {
    let r = polyrep(&["loss-check", "--seed", "3", "--trials", "5"]);
    assert_eq!(code(&r), 0);
    let text = String::from_utf8_lossy(&r.stdout);
    assert_eq!(text.matches("PASS").count(), 4, "{text}");
}

#[test]
fn occupancy_demo_and_region_file() {
    let dir = tempfile::tempdir().unwrap();
    let demo = dir.path().join("demo");
    let r = polyrep(&["occupancy", "--demo", "--out", p(&demo)]);
    assert_eq!(code(&r), 0);
    let csv = fs::read_to_string(demo.join("report.csv")).unwrap();
    assert!(csv.lines().any(|l| l.starts_with("BoundingBox,occupied")));
    assert!(csv.lines().any(|l| l.starts_with("P24,free")));

    // the scene written by the demo feeds the file-based path
    let scene = demo.join("scene");
    let out = dir.path().join("again");
    let r = polyrep(&[
        "occupancy",
        "--region",
        p(&scene.join("region.json")),
        "--corpus",
        p(&scene),
        "--reps",
        "box,p24",
        "--out",
        p(&out),
    ]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stderr));
    let again = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(again.lines().any(|l| l.starts_with("BoundingBox,occupied")));
    assert!(again.lines().any(|l| l.starts_with("P24,free")));
}

#[test]
fn bad_thread_count_is_a_usage_error() {
    let r = Command::new(env!("CARGO_BIN_EXE_polyrep"))
        .args(["loss-check", "--trials", "1"])
        .env("POLYREP_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&r), 2);
}

#[test]
fn two_hundred_frames_within_a_minute() {
    let dir = tempfile::tempdir().unwrap();
    let start = std::time::Instant::now();
    generate(dir.path(), 0, 200);
    assert!(
        start.elapsed() < std::time::Duration::from_secs(60),
        "{:?}",
        start.elapsed()
    );
}
