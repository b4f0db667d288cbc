use std::sync::atomic::{AtomicI64, Ordering};
use std::sync::{Arc, OnceLock};

use arpa_core::audio::{encode_wav_bytes, AudioClip};
use arpa_core::classifiers::{train_knn, vectors_from_manifest, FeatureVector, TrainedModel};
use arpa_core::config::PipelineConfig;
use arpa_core::dataset::{generate_synthetic_corpus, synth_clip, Label, SynthRecipe};
use arpa_service::store::{Clock, Store};
use arpa_service::{router, AppState, Diagnoser, ModelRegistry};
use axum::body::Body;
use axum::http::{header, Request, StatusCode};
use chrono::{DateTime, Utc};
use http_body_util::BodyExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

struct StepClock(AtomicI64);

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        DateTime::from_timestamp(1_750_000_000 + self.0.fetch_add(1, Ordering::SeqCst), 0).unwrap()
    }
}

fn models() -> &'static Vec<TrainedModel> {
    static MODELS: OnceLock<Vec<TrainedModel>> = OnceLock::new();
    MODELS.get_or_init(|| {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_synthetic_corpus(&SynthRecipe::default(), 15, 5, dir.path()).unwrap();
        let data = vectors_from_manifest(&manifest, &PipelineConfig::default()).unwrap();
        manifest
            .letters()
            .iter()
            .map(|l| {
                let subset: Vec<FeatureVector> = data.iter().filter(|v| &v.letter == l).cloned().collect();
                train_knn(&subset, 5).unwrap()
            })
            .collect()
    })
}

struct Harness {
    _dir: tempfile::TempDir,
    state: AppState,
}

fn harness(tokens: Vec<String>, max_upload_bytes: usize) -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let diagnoser = Diagnoser::new(
        &PipelineConfig::default(),
        ModelRegistry::from_models(models().iter().cloned()),
        30.0,
    )
    .unwrap();
    let store = Store::open(dir.path(), Arc::new(StepClock(AtomicI64::new(0)))).unwrap();
    Harness {
        _dir: dir,
        state: AppState {
            diagnoser: Arc::new(diagnoser),
            store: Arc::new(store),
            tokens: Arc::new(tokens),
            max_upload_bytes,
        },
    }
}

fn default_harness() -> Harness {
    harness(Vec::new(), 10 * 1024 * 1024)
}

async fn send(h: &Harness, req: Request<Body>) -> (StatusCode, Vec<u8>) {
    let res = router(h.state.clone()).oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

async fn send_json(h: &Harness, req: Request<Body>) -> (StatusCode, Value) {
    let (status, body) = send(h, req).await;
    (status, serde_json::from_slice(&body).unwrap_or(Value::Null))
}

fn post_json(uri: &str, body: Value) -> Request<Body> {
    Request::post(uri)
        .header(header::CONTENT_TYPE, "application/json")
        .body(Body::from(body.to_string()))
        .unwrap()
}

fn get(uri: &str) -> Request<Body> {
    Request::get(uri).body(Body::empty()).unwrap()
}

const BOUNDARY: &str = "arpa-test-boundary";

fn diagnose_req(wav: &[u8], letter: &str, child: Option<&str>) -> Request<Body> {
    let mut body = Vec::new();
    let mut text_field = |name: &str, value: &str| {
        body.extend_from_slice(
            format!("--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"{name}\"\r\n\r\n{value}\r\n").as_bytes(),
        );
    };
    text_field("letter_id", letter);
    if let Some(c) = child {
        text_field("child_id", c);
    }
    body.extend_from_slice(
        format!(
            "--{BOUNDARY}\r\nContent-Disposition: form-data; name=\"audio\"; filename=\"a.wav\"\r\nContent-Type: audio/wav\r\n\r\n"
        )
        .as_bytes(),
    );
    body.extend_from_slice(wav);
    body.extend_from_slice(format!("\r\n--{BOUNDARY}--\r\n").as_bytes());
    Request::post("/api/v1/diagnose")
        .header(header::CONTENT_TYPE, format!("multipart/form-data; boundary={BOUNDARY}"))
        .body(Body::from(body))
        .unwrap()
}

fn fixture(letter: &str, label: Label, seed: u64) -> Vec<u8> {
    let recipe = SynthRecipe::default();
    let l = recipe.letters.iter().find(|l| l.letter == letter).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let clip = synth_clip(l.template(label), 16_000, 1.0, &mut rng);
    encode_wav_bytes(&clip).unwrap()
}

async fn register(h: &Harness, name: &str) -> String {
    let (status, body) = send_json(
        h,
        post_json(
            "/api/v1/children",
            json!({"display_name": name, "age_years": 7, "gender": "female", "guardian_role": "parent"}),
        ),
    )
    .await;
    assert_eq!(status, StatusCode::CREATED, "{body}");
    body["child_id"].as_str().unwrap().to_string()
}

#[tokio::test]
async fn letters_lists_loaded_models() {
    let h = default_harness();
    let (status, body) = send_json(&h, get("/api/v1/letters")).await;
    assert_eq!(status, StatusCode::OK);
    let ids: Vec<&str> = body.as_array().unwrap().iter().map(|l| l["letter_id"].as_str().unwrap()).collect();
    assert_eq!(ids, vec!["ghaa", "raa", "thaa"]);
}

#[tokio::test]
async fn registration_status_codes() {
    let h = default_harness();
    register(&h, "Lina").await;
    let dup = json!({"display_name": "Lina", "age_years": 7, "gender": "female", "guardian_role": "parent"});
    assert_eq!(send(&h, post_json("/api/v1/children", dup)).await.0, StatusCode::CONFLICT);
    let old = json!({"display_name": "Omar", "age_years": 99, "guardian_role": "parent"});
    assert_eq!(send(&h, post_json("/api/v1/children", old)).await.0, StatusCode::BAD_REQUEST);
    let role = json!({"display_name": "Omar", "age_years": 5, "guardian_role": "uncle"});
    assert_eq!(send(&h, post_json("/api/v1/children", role)).await.0, StatusCode::BAD_REQUEST);
    let req = Request::post("/api/v1/children").body(Body::from("{not json")).unwrap();
    assert_eq!(send(&h, req).await.0, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn diagnosis_updates_level() {
    let h = default_harness();
    let id = register(&h, "Sara").await;
    let (status, body) = send_json(&h, diagnose_req(&fixture("raa", Label::Correct, 900), "raa", Some(&id))).await;
    assert_eq!(status, StatusCode::OK, "{body}");
    assert_eq!(body["label"], "correct");
    assert_eq!(body["level"], 1);
    assert_eq!(body["model"]["kind"], "knn");
    let score = body["score"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&score));

    let (_, body) = send_json(&h, diagnose_req(&fixture("raa", Label::Incorrect, 901), "raa", Some(&id))).await;
    assert_eq!(body["label"], "incorrect");
    assert_eq!(body["level"], 1);

    let (status, progress) = send_json(&h, get(&format!("/api/v1/children/{id}/progress"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(progress[0]["level"], 1);
    assert_eq!(progress[0]["history"].as_array().unwrap().len(), 2);
}

#[tokio::test]
async fn diagnosis_is_independent_of_history() {
    let h = default_harness();
    let wav = fixture("thaa", Label::Correct, 77);
    let (_, a) = send_json(&h, diagnose_req(&wav, "thaa", None)).await;
    let id = register(&h, "Ali").await;
    for _ in 0..3 {
        send(&h, diagnose_req(&fixture("thaa", Label::Incorrect, 5), "thaa", Some(&id))).await;
    }
    let (_, b) = send_json(&h, diagnose_req(&wav, "thaa", Some(&id))).await;
    assert_eq!(a["label"], b["label"]);
    assert_eq!(a["score"], b["score"]);
    assert!(a.get("level").is_none());
}

#[tokio::test]
async fn unusable_recordings() {
    let h = default_harness();
    let silence = encode_wav_bytes(&AudioClip::new(vec![0.0; 16_000], 16_000).unwrap()).unwrap();
    let (status, body) = send_json(&h, diagnose_req(&silence, "raa", None)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["reason"], "silence");

    let blip: Vec<f64> = (0..200).map(|i| 0.5 * (i as f64 * 0.3).sin()).collect();
    let short = encode_wav_bytes(&AudioClip::new(blip, 16_000).unwrap()).unwrap();
    let (status, body) = send_json(&h, diagnose_req(&short, "raa", None)).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(body["reason"], "too_short");

    let (status, _) = send_json(&h, diagnose_req(b"definitely not a wav", "raa", None)).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);

    let long: Vec<f64> = (0..31 * 8_000).map(|i| 0.3 * (i as f64 * 0.2).sin()).collect();
    let long = encode_wav_bytes(&AudioClip::new(long, 8_000).unwrap()).unwrap();
    let (status, body) = send_json(&h, diagnose_req(&long, "raa", None)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE, "{body}");
}

#[tokio::test]
async fn not_found_cases() {
    let h = default_harness();
    let wav = fixture("raa", Label::Correct, 1);
    assert_eq!(send(&h, diagnose_req(&wav, "zz", None)).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&h, diagnose_req(&wav, "raa", Some("ghost"))).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&h, get("/api/v1/children/ghost/progress")).await.0, StatusCode::NOT_FOUND);
    assert_eq!(send(&h, get("/api/v1/children/ghost/report")).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn oversized_upload_is_rejected() {
    let h = harness(Vec::new(), 4_096);
    let (status, _) = send(&h, diagnose_req(&fixture("raa", Label::Correct, 2), "raa", None)).await;
    assert_eq!(status, StatusCode::PAYLOAD_TOO_LARGE);
}

#[tokio::test]
async fn bearer_tokens() {
    let h = harness(vec!["parent-secret".into(), "therapist-secret".into()], 1 << 20);
    assert_eq!(send(&h, get("/api/v1/letters")).await.0, StatusCode::UNAUTHORIZED);
    let bad = Request::get("/api/v1/letters")
        .header(header::AUTHORIZATION, "Bearer nope")
        .body(Body::empty())
        .unwrap();
    assert_eq!(send(&h, bad).await.0, StatusCode::UNAUTHORIZED);
    let good = Request::get("/api/v1/letters")
        .header(header::AUTHORIZATION, "Bearer therapist-secret")
        .body(Body::empty())
        .unwrap();
    assert_eq!(send(&h, good).await.0, StatusCode::OK);
    assert_eq!(send(&h, get("/api/v1/health")).await.0, StatusCode::OK);
}

#[tokio::test]
async fn reports() {
    let h = default_harness();
    let id = register(&h, "Huda").await;
    let (status, empty) = send_json(&h, get(&format!("/api/v1/children/{id}/report"))).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(empty["letters"].as_array().unwrap().len(), 0);

    for (i, label) in [Label::Correct, Label::Correct, Label::Incorrect].into_iter().enumerate() {
        send(&h, diagnose_req(&fixture("ghaa", label, 40 + i as u64), "ghaa", Some(&id))).await;
    }
    send(&h, diagnose_req(&fixture("raa", Label::Correct, 50), "raa", Some(&id))).await;

    let uri = format!("/api/v1/children/{id}/report?format=json");
    let (_, first) = send(&h, get(&uri)).await;
    let (_, second) = send(&h, get(&uri)).await;
    assert_eq!(first, second);
    let report: Value = serde_json::from_slice(&first).unwrap();
    assert_eq!(report["letters"].as_array().unwrap().len(), 2);
    let trajectory: Vec<u64> = report["letters"][0]["trajectory"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert!(trajectory.windows(2).all(|w| w[0] <= w[1]));

    let res = router(h.state.clone())
        .oneshot(get(&format!("/api/v1/children/{id}/report?format=markdown")))
        .await
        .unwrap();
    assert!(res.headers()[header::CONTENT_TYPE].to_str().unwrap().starts_with("text/markdown"));
    let md = String::from_utf8(res.into_body().collect().await.unwrap().to_bytes().to_vec()).unwrap();
    assert!(md.contains("# Progress report: Huda"));
    assert_eq!(send(&h, get(&format!("/api/v1/children/{id}/report?format=pdf"))).await.0, StatusCode::BAD_REQUEST);
}
