use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::sync::OnceLock;

use arpa_core::audio::{save_wav, AudioClip};
use arpa_core::dataset::{load_manifest, DatasetManifest, Label, LabeledSample};

fn arpa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_arpa"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("arpa runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small corpus and per-letter knn models shared by the read-only tests.
struct Shared {
    _dir: tempfile::TempDir,
    corpus: PathBuf,
    models: PathBuf,
}

fn shared() -> &'static Shared {
    static SHARED: OnceLock<Shared> = OnceLock::new();
    SHARED.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus");
        let models = dir.path().join("models");
        assert_eq!(code(&arpa(&["synth", "--out", s(&corpus), "--n", "12", "--seed", "3"])), 0);
        let manifest = corpus.join("manifest.json");
        let out = arpa(&["train", "--manifest", s(&manifest), "--model", "knn", "--params", "k=3", "--out", s(&models)]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        Shared {
            _dir: dir,
            corpus,
            models,
        }
    })
}

fn files_under(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn help_and_unknown_flags() {
    assert_eq!(code(&arpa(&["--help"])), 0);
    assert_eq!(code(&arpa(&["extract", "--help"])), 0);
    assert_eq!(code(&arpa(&["synth", "--bogus"])), 2);
    assert_eq!(code(&arpa(&[])), 2);
}

#[test]
fn synth_counts_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(code(&arpa(&["synth", "--out", s(&a), "--n", "4", "--seed", "9"])), 0);
    assert_eq!(code(&arpa(&["synth", "--out", s(&b), "--n", "4", "--seed", "9"])), 0);
    let fa = files_under(&a);
    let wavs = fa.iter().filter(|p| p.extension().is_some_and(|e| e == "wav")).count();
    assert_eq!(wavs, 3 * 2 * 4);
    for p in &fa {
        let q = b.join(p.strip_prefix(&a).unwrap());
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(q).unwrap());
    }
}

#[test]
fn bad_recipe_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let recipe = dir.path().join("r.json");
    let text = r#"{"sample_rate_hz":16000,"duration_secs":0.5,"letters":[{"letter":"raa",
        "correct":{"freqs_hz":[700,1200],"noise_level":0.01},
        "incorrect":{"freqs_hz":[710,1210],"noise_level":0.01}}]}"#;
    std::fs::write(&recipe, text).unwrap();
    let out = arpa(&["synth", "--recipe", s(&recipe), "--out", s(&dir.path().join("c"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("recipe"), "{}", stderr(&out));
}

#[test]
fn augment_to_target() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    assert_eq!(code(&arpa(&["synth", "--out", s(&corpus), "--n", "10", "--seed", "1"])), 0);
    let manifest = corpus.join("manifest.json");
    let out = arpa(&["augment", "--manifest", s(&manifest), "--target", "100", "--factors", "0.9:1.1", "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let aug = load_manifest(corpus.join("manifest.augmented.json")).unwrap();
    for (_, n) in aug.letter_counts() {
        assert_eq!(n, 100);
    }
    let count = |l: Label| aug.samples.iter().filter(|x| x.letter == "raa" && x.label == l).count();
    assert_eq!(count(Label::Correct), 50);

    let before = files_under(&corpus).len();
    let again = arpa(&["augment", "--manifest", s(&manifest), "--target", "20"]);
    assert_eq!(code(&again), 0, "{}", stderr(&again));
    assert_eq!(files_under(&corpus).len(), before);
    assert_eq!(code(&arpa(&["augment", "--manifest", s(&manifest), "--factors", "0.1:3"])), 2);
}

#[test]
fn extract_writes_two_files_per_clip_and_images() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = shared().corpus.join("manifest.json");
    let n = load_manifest(&manifest).unwrap().len();
    let plain = dir.path().join("plain");
    assert_eq!(code(&arpa(&["extract", "--manifest", s(&manifest), "--out", s(&plain)])), 0);
    assert_eq!(files_under(&plain).len(), 2 * n);
    let img = dir.path().join("img");
    assert_eq!(code(&arpa(&["extract", "--manifest", s(&manifest), "--out", s(&img), "--images"])), 0);
    let files = files_under(&img);
    assert_eq!(files.iter().filter(|p| p.extension().is_some_and(|e| e == "png")).count(), 2 * n);
    assert_eq!(files.iter().filter(|p| p.extension().is_some_and(|e| e == "json")).count(), 2 * n);
}

#[test]
fn train_errors() {
    let manifest = shared().corpus.join("manifest.json");
    let dir = tempfile::tempdir().unwrap();
    let out = arpa(&["train", "--manifest", s(&manifest), "--model", "forest", "--out", s(dir.path())]);
    assert_eq!(code(&out), 2);

    let m = load_manifest(&manifest).unwrap();
    let only_correct: Vec<LabeledSample> = m
        .samples
        .iter()
        .filter(|x| x.label == Label::Correct)
        .map(|x| LabeledSample {
            path: m.resolve(x),
            ..x.clone()
        })
        .collect();
    let single = dir.path().join("single.json");
    DatasetManifest::new(dir.path(), only_correct).save(&single).unwrap();
    let out = arpa(&["train", "--manifest", s(&single), "--model", "svm", "--letter", "raa", "--out", s(&dir.path().join("m.json"))]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("single class"));
}

#[test]
fn single_letter_model_file_loads() {
    let manifest = shared().corpus.join("manifest.json");
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("raa.json");
    let out = arpa(&["train", "--manifest", s(&manifest), "--model", "tree", "--letter", "raa", "--out", s(&file)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model = arpa_core::classifiers::load_model(&file).unwrap();
    assert_eq!(model.letter, "raa");
}

#[test]
fn eval_report() {
    let manifest = shared().corpus.join("manifest.json");
    let dir = tempfile::tempdir().unwrap();
    let md = dir.path().join("r.md");
    let out = arpa(&["eval", "--manifest", s(&manifest), "--model-kind", "knn", "--cv", "4", "--seed", "1", "--report", s(&md)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = std::fs::read_to_string(&md).unwrap();
    assert!(text.contains("| Model | Precision | Recall | F1-Score | Accuracy |"));

    let csv = dir.path().join("r.csv");
    let out = arpa(&["eval", "--manifest", s(&manifest), "--model-kind", "knn", "--model-kind", "tree", "--cv", "4", "--report", s(&csv)]);
    assert_eq!(code(&out), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let n = load_manifest(&manifest).unwrap().len() as u64;
    let totals: Vec<u64> = text
        .lines()
        .filter(|l| l.split(',').nth(1) == Some("all"))
        .map(|l| l.split(',').skip(7).map(|v| v.parse::<u64>().unwrap()).sum())
        .collect();
    assert_eq!(totals, vec![n, n]);

    let out = arpa(&["eval", "--manifest", s(&manifest), "--report", s(dir.path())]);
    assert_eq!(code(&out), 0);
    assert!(files_under(dir.path())
        .iter()
        .any(|p| p.file_name().unwrap().to_string_lossy().starts_with("report-corpus-knn-")));
}

#[test]
fn diagnose_exit_codes() {
    let sh = shared();
    let models = s(&sh.models);
    let correct = sh.corpus.join("raa/correct/raa_correct_000.wav");
    let out = arpa(&["diagnose", "--wav", s(&correct), "--letter", "raa", "--models", models]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let v: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(v["label"], "correct");

    let incorrect = sh.corpus.join("raa/incorrect/raa_incorrect_000.wav");
    assert_eq!(code(&arpa(&["diagnose", "--wav", s(&incorrect), "--letter", "raa", "--models", models])), 1);

    let dir = tempfile::tempdir().unwrap();
    let silent = dir.path().join("silent.wav");
    save_wav(&AudioClip::new(vec![0.0; 16_000], 16_000).unwrap(), &silent).unwrap();
    let out = arpa(&["diagnose", "--wav", s(&silent), "--letter", "raa", "--models", models]);
    assert_eq!(code(&out), 4);
    assert!(stderr(&out).contains("silence"));

    let out = arpa(&["diagnose", "--wav", s(&correct), "--letter", "raa", "--models", s(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn serve_refuses_empty_model_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = arpa(&[
        "serve",
        "--listen",
        "127.0.0.1:0",
        "--models",
        s(dir.path()),
        "--data",
        s(&dir.path().join("data")),
    ]);
    assert_eq!(code(&out), 2);
}

#[test]
fn config_file_feeds_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("arpa.toml");
    std::fs::write(&cfg, "[pipeline]\nn_mfcc = 12\n").unwrap();
    let manifest = shared().corpus.join("manifest.json");
    let out_dir = dir.path().join("m");
    let out = arpa(&["--config", s(&cfg), "train", "--manifest", s(&manifest), "--model", "knn", "--letter", "raa", "--out", s(&out_dir)]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model = arpa_core::classifiers::load_model(out_dir.join("raa-knn.json")).unwrap();
    assert_eq!(model.dim(), 24);

    std::fs::write(&cfg, "[pipeline]\nbogus = 1\n").unwrap();
    assert_eq!(code(&arpa(&["--config", s(&cfg), "synth", "--out", s(dir.path())])), 2);
}
