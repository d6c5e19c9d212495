use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvhash::codes::BinaryCodes;
use mvhash::io::load_dataset;
use mvhash::model_file::ModelFile;

fn mvhash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mvhash")).args(args).env("RUST_BACKTRACE", "0").output().unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = mvhash(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn fail(args: &[&str]) -> String {
    let out = mvhash(args);
    assert!(!out.status.success(), "{args:?} should fail");
    String::from_utf8(out.stderr).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const SMALL: &[&str] = &["--clusters", "4", "--per-cluster", "50", "--dims", "6,9", "--view-noise", "0.5"];
const FAST: &[&str] = &["--landmarks", "30", "--bits", "16", "--base-size", "40", "--oos-neighbors", "8"];

/// Database and query manifests plus a trained model.
fn trained(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let (db, q, model) = (dir.join("db.manifest"), dir.join("q.manifest"), dir.join("m.mvhm"));
    let mut args = vec!["synth", "--out", s(&db), "--query-out", s(&q), "--n-queries", "40"];
    args.extend_from_slice(SMALL);
    ok(&args);
    let mut args = vec!["train", "--data", s(&db), "--model", s(&model), "--codes"];
    let codes = dir.join("db.codes");
    args.push(s(&codes));
    args.extend_from_slice(FAST);
    ok(&args);
    (db, q, model)
}

#[test]
fn synth_round_trips_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.manifest"), dir.path().join("b.manifest"));
    for p in [&a, &b] {
        let mut args = vec!["synth", "--out", s(p), "--seed", "3"];
        args.extend_from_slice(SMALL);
        ok(&args);
    }
    let ds = load_dataset(&a).unwrap();
    assert_eq!((ds.len(), ds.dims()), (200, vec![6, 9]));
    for m in 0..2 {
        let fa = fs::read(dir.path().join(format!("a.view{m}.mvh1"))).unwrap();
        let fb = fs::read(dir.path().join(format!("b.view{m}.mvh1"))).unwrap();
        assert_eq!(fa, fb);
    }
}

#[test]
fn default_synth_lists_two_views() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("d.manifest");
    ok(&["synth", "--out", s(&p)]);
    let text = fs::read_to_string(&p).unwrap();
    assert_eq!(text.lines().filter(|l| l.starts_with("view")).count(), 2);
    assert_eq!(load_dataset(&p).unwrap().len(), 2000);
}

#[test]
fn corrupt_keeps_shape() {
    let dir = tempfile::tempdir().unwrap();
    let (p, c) = (dir.path().join("d.manifest"), dir.path().join("c.manifest"));
    let mut args = vec!["synth", "--out", s(&p)];
    args.extend_from_slice(SMALL);
    ok(&args);
    ok(&["corrupt", "--data", s(&p), "--out", s(&c), "--corruption", "block", "--fraction", "0.3"]);
    let (a, b) = (load_dataset(&p).unwrap(), load_dataset(&c).unwrap());
    assert_eq!((a.len(), a.dims()), (b.len(), b.dims()));
    assert_ne!(a.view(0), b.view(0));
}

#[test]
fn train_writes_model_traces_and_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (db, _, model) = trained(dir.path());
    let alm = fs::read_to_string(dir.path().join("m.mvhm.alm.csv")).unwrap();
    assert!(alm.starts_with("iteration,recon_residual,coupling_residual,objective,mu\n"));
    let obj = fs::read_to_string(dir.path().join("m.mvhm.objective.csv")).unwrap();
    assert!(obj.starts_with("iteration,objective,relative_change\n"));

    let file = ModelFile::load(&model).unwrap();
    let text = BinaryCodes::from_text(&fs::read_to_string(dir.path().join("db.codes")).unwrap()).unwrap();
    assert_eq!(file.database_codes.as_ref(), Some(&text));

    let out = dir.path().join("enc.codes");
    ok(&["encode", "--model", s(&model), "--data", s(&db), "--out", s(&out)]);
    let encoded = BinaryCodes::from_text(&fs::read_to_string(&out).unwrap()).unwrap();
    let reloaded = ModelFile::load(&model).unwrap();
    assert_eq!(encoded, reloaded.model.encode_dataset(&load_dataset(&db).unwrap()).unwrap());
}

#[test]
fn eval_beats_random_codes_with_default_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let (db, q, model) = trained(dir.path());
    let report = dir.path().join("r.json");
    let stdout = ok(&["eval", "--model", s(&model), "--database", s(&db), "--queries", s(&q), "--out", s(&report)]);
    let value = |prefix: &str| -> f64 {
        let line = stdout.lines().find(|l| l.starts_with(prefix)).unwrap();
        line.rsplit('=').next().unwrap().trim().parse().unwrap()
    };
    assert!(value("MAP@100") > value("random-code MAP@100"), "{stdout}");
    let json = fs::read_to_string(&report).unwrap();
    assert!(json.contains("\"radius\": 2") && json.contains("\"top_k\": 100"), "{json}");
    let pr = fs::read_to_string(dir.path().join("r.pr.csv")).unwrap();
    assert!(pr.starts_with("radius,recall,precision\n"));
    assert_eq!(pr.lines().count(), 1 + 17);

    let proto = dir.path().join("p.json");
    ok(&["eval", "--model", s(&model), "--database", s(&db), "--queries", s(&q), "--out", s(&proto), "--encoder", "prototype"]);
}

#[test]
fn query_ranks_stored_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (_, q, model) = trained(dir.path());
    let stdout = ok(&["query", "--model", s(&model), "--data", s(&q), "--index", "2", "--top-k", "5"]);
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "rank,database_index,hamming_distance");
    assert_eq!(lines.len(), 6);
    let dists: Vec<u32> = lines[1..].iter().map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect();
    assert!(dists.windows(2).all(|w| w[0] <= w[1]));
    fail(&["query", "--model", s(&model), "--data", s(&q), "--index", "9999"]);
}

#[test]
fn dimension_mismatch_names_expected_dims() {
    let dir = tempfile::tempdir().unwrap();
    let (db, _, model) = trained(dir.path());
    let other = dir.path().join("o.manifest");
    ok(&["synth", "--out", s(&other), "--dims", "3,4", "--per-cluster", "5"]);
    let err = fail(&["eval", "--model", s(&model), "--database", s(&db), "--queries", s(&other), "--out", s(&dir.path().join("x.json"))]);
    assert!(err.contains("[6, 9]") && err.contains("[3, 4]"), "{err}");
    let err = fail(&["encode", "--model", s(&model), "--data", s(&other), "--out", s(&dir.path().join("x.codes"))]);
    assert!(err.contains("[6, 9]"), "{err}");
}

#[test]
fn damaged_model_files_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (_, _, model) = trained(dir.path());
    let bytes = fs::read(&model).unwrap();

    let cut = dir.path().join("cut.mvhm");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let err = fail(&["inspect", "--model", s(&cut)]);
    assert!(err.contains("corrupt"), "{err}");

    let mut newer = bytes.clone();
    newer[4..8].copy_from_slice(&7u32.to_le_bytes());
    let path = dir.path().join("new.mvhm");
    fs::write(&path, &newer).unwrap();
    let err = fail(&["inspect", "--model", s(&path)]);
    assert!(err.contains('7') && err.contains('1') && err.contains("version"), "{err}");
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nclusters = 3\nper_cluster = 30\ndims = 4,5\nbits = 12\nlandmarks = 20\nbase_size = 0\n").unwrap();
    let data = dir.path().join("d.manifest");
    ok(&["synth", "--config", s(&cfg), "--out", s(&data)]);
    let model = dir.path().join("m.mvhm");
    ok(&["train", "--config", s(&cfg), "--data", s(&data), "--model", s(&model), "--bits", "8"]);
    let info = ok(&["inspect", "--model", s(&model)]);
    assert!(info.contains("bits: 8"), "{info}");
    assert!(info.contains("landmarks = 20") && info.contains("base set: none"), "{info}");

    let err = fail(&["train", "--config", s(&cfg), "--data", s(&data), "--model", s(&model), "--alpha", "-1"]);
    assert!(err.contains("alpha"), "{err}");
    fs::write(&cfg, "colour = red\n").unwrap();
    let err = fail(&["synth", "--config", s(&cfg), "--out", s(&data)]);
    assert!(err.contains("colour"), "{err}");
}

#[test]
fn missing_inputs_fail() {
    let dir = tempfile::tempdir().unwrap();
    fail(&["train", "--data", s(&dir.path().join("none.manifest")), "--model", s(&dir.path().join("m.mvhm"))]);
    fail(&["inspect", "--model", s(&dir.path().join("none.mvhm"))]);
}
