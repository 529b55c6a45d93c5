use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use ninegrid::arrange::VariantKey;
use ninegrid::study::{build_study, QuadRef, StudyBundle, VariantRef, BALLOT_LOG};
use ninegrid_service::{router, Registry};
use serde_json::{json, Value};
use tower::ServiceExt;

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/table1")
}

fn quads(n: usize) -> Vec<QuadRef> {
    (0..n)
        .map(|i| QuadRef {
            set_id: format!("set-{i}"),
            variants: VariantKey::ALL
                .iter()
                .enumerate()
                .map(|(k, key)| VariantRef {
                    scorer: key.scorer,
                    strategy: key.strategy,
                    scorer_id: "x".into(),
                    path: format!("media/{:032x}.png", i * 4 + k),
                })
                .collect(),
        })
        .collect()
}

fn write_media(bundle: &StudyBundle, dir: &Path) {
    fs::create_dir_all(dir.join("media")).unwrap();
    for q in &bundle.quads {
        for v in &q.variants {
            fs::write(dir.join(&v.path), v.path.as_bytes()).unwrap();
        }
    }
}

/// A study with `nq` questionnaires of `per` questions, media in place.
fn make_bundle(root: &Path, nq: usize, per: usize) -> PathBuf {
    let dir = root.join("bundle");
    let bundle = build_study("mini", &quads(nq * per), nq, per, 42).unwrap();
    bundle.save(&dir).unwrap();
    write_media(&bundle, &dir);
    dir
}

struct App {
    router: axum::Router,
}

impl App {
    fn open(data: &Path) -> Self {
        App {
            router: router(Arc::new(Registry::open(data).unwrap())),
        }
    }

    async fn send(&self, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Value) {
        let (status, bytes) = self.send_raw(method, uri, body).await;
        let v = if bytes.is_empty() {
            Value::Null
        } else {
            serde_json::from_slice(&bytes).unwrap_or(Value::Null)
        };
        (status, v)
    }

    async fn send_raw(
        &self,
        method: &str,
        uri: &str,
        body: Option<Value>,
    ) -> (StatusCode, Vec<u8>) {
        let mut req = Request::builder().method(method).uri(uri);
        let body = match body {
            Some(v) => {
                req = req.header("content-type", "application/json");
                Body::from(v.to_string())
            }
            None => Body::empty(),
        };
        let resp = self
            .router
            .clone()
            .oneshot(req.body(body).unwrap())
            .await
            .unwrap();
        let status = resp.status();
        let bytes = resp
            .into_body()
            .collect()
            .await
            .unwrap()
            .to_bytes()
            .to_vec();
        (status, bytes)
    }

    async fn load(&self, dir: &Path) -> (StatusCode, Value) {
        self.send("POST", "/studies", Some(json!({ "bundle_path": dir })))
            .await
    }
}

#[tokio::test]
async fn load_is_idempotent_and_checks_media() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = make_bundle(tmp.path(), 2, 3);
    let app = App::open(&tmp.path().join("data"));

    let (status, v) = app.load(&dir).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["study_id"], "mini");
    let (status, v) = app.load(&dir.join("study.json")).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["study_id"], "mini");

    let broken = tmp.path().join("broken");
    let bundle = build_study("broken", &quads(3), 1, 3, 1).unwrap();
    bundle.save(&broken).unwrap();
    write_media(&bundle, &broken);
    fs::remove_file(broken.join(&bundle.quads[1].variants[2].path)).unwrap();
    let (status, v) = app.load(&broken).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "bundle_invalid");

    let (status, v) = app.send("POST", "/studies", Some(json!({"nope": 1}))).await;
    assert_eq!(status, StatusCode::BAD_REQUEST);
    assert_eq!(v["code"], "bad_request");
}

#[tokio::test]
async fn sessions_round_robin() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = make_bundle(tmp.path(), 5, 2);
    let app = App::open(&tmp.path().join("data"));
    app.load(&dir).await;

    let mut seen = Vec::new();
    let mut tokens = std::collections::HashSet::new();
    for _ in 0..10 {
        let (status, v) = app.send("POST", "/studies/mini/sessions", None).await;
        assert_eq!(status, StatusCode::CREATED);
        assert_eq!(v["cursor"], 0);
        seen.push(v["questionnaire_index"].as_u64().unwrap());
        tokens.insert(v["session_id"].as_str().unwrap().to_string());
    }
    assert_eq!(seen, vec![0, 1, 2, 3, 4, 0, 1, 2, 3, 4]);
    assert_eq!(tokens.len(), 10);

    let (status, v) = app.send("POST", "/studies/nope/sessions", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(v["code"], "not_found");
}

#[tokio::test]
async fn questions_are_blind_and_linear() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = make_bundle(tmp.path(), 1, 4);
    let app = App::open(&tmp.path().join("data"));
    app.load(&dir).await;
    let (_, s) = app.send("POST", "/studies/mini/sessions", None).await;
    let sid = s["session_id"].as_str().unwrap();

    let (status, v) = app
        .send("GET", &format!("/sessions/{sid}/questions/0"), None)
        .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["options"].as_array().unwrap().len(), 4);
    assert_eq!(v["progress"], json!({"answered": 0, "total": 4}));
    let text = v.to_string();
    for label in [
        "aesthetic",
        "content",
        "center",
        "sequential",
        "scorer",
        "strategy",
    ] {
        assert!(!text.contains(label), "payload leaks `{label}`: {text}");
    }

    let url = v["options"][0]["url"].as_str().unwrap();
    let (status, bytes) = app.send_raw("GET", url, None).await;
    assert_eq!(status, StatusCode::OK);
    assert!(!bytes.is_empty());
    let (status, _) = app.send_raw("GET", "/media/mini/../study.json", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    let (status, _) = app.send_raw("GET", "/media/mini/study.json", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, v) = app
        .send("GET", &format!("/sessions/{sid}/questions/3"), None)
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "wrong_question");
}

#[tokio::test]
async fn answering_a_questionnaire() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = make_bundle(tmp.path(), 1, 4);
    let app = App::open(&tmp.path().join("data"));
    app.load(&dir).await;
    let (_, s) = app.send("POST", "/studies/mini/sessions", None).await;
    let sid = s["session_id"].as_str().unwrap().to_string();
    let answer = |n: usize, slot: i64| {
        let uri = format!("/sessions/{sid}/answers");
        let app = &app;
        async move {
            app.send(
                "POST",
                &uri,
                Some(json!({"question_index": n, "slot": slot})),
            )
            .await
        }
    };

    let (status, v) = answer(0, 5).await;
    assert_eq!(status, StatusCode::UNPROCESSABLE_ENTITY);
    assert_eq!(v["code"], "invalid_choice");

    let (status, v) = answer(0, 2).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(v["progress"]["answered"], 1);
    assert_eq!(v["completed"], false);

    let (status, v) = answer(0, 3).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "already_answered");

    let (status, v) = answer(3, 1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "wrong_question");

    for n in 1..4 {
        let (status, v) = answer(n, (n % 4 + 1) as i64).await;
        assert_eq!(status, StatusCode::OK);
        assert_eq!(v["completed"], n == 3);
    }
    let (status, v) = answer(4, 1).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "session_completed");
    let (status, v) = app
        .send("GET", &format!("/sessions/{sid}/questions/4"), None)
        .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(v["code"], "session_completed");

    let log = fs::read_to_string(dir.join(BALLOT_LOG)).unwrap();
    assert_eq!(log.lines().count(), 4);

    let (_, t) = app.send("GET", "/studies/mini/tally", None).await;
    assert_eq!(t["tally"]["total"], 4);
    assert!(t["summary"]["chi_square"].is_number());

    // Resolution check: every ballot's variant matches its stored permutation.
    let bundle = StudyBundle::load(&dir).unwrap();
    for line in log.lines() {
        let b: ninegrid::Ballot = serde_json::from_str(line).unwrap();
        let q = bundle
            .question(b.questionnaire_index, b.question_index)
            .unwrap();
        assert_eq!(q.resolve(b.chosen_slot), Some(b.resolved_variant));
    }
}

#[tokio::test]
async fn empty_and_unknown_tallies() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = make_bundle(tmp.path(), 1, 2);
    let app = App::open(&tmp.path().join("data"));
    app.load(&dir).await;
    let (status, t) = app.send("GET", "/studies/mini/tally", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(t["tally"]["total"], 0);
    assert!(t["summary"].is_null());
    let (status, _) = app.send("GET", "/studies/zzz/tally", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn fixture_tally_and_restart() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path().join("table1");
    fs::create_dir_all(&dir).unwrap();
    for f in ["study.json", BALLOT_LOG, "sessions.jsonl"] {
        fs::copy(fixture_dir().join(f), dir.join(f)).unwrap();
    }
    let bundle = StudyBundle::load(&dir).unwrap();
    write_media(&bundle, &dir);

    let data = tmp.path().join("data");
    let app = App::open(&data);
    let (status, _) = app.load(&dir).await;
    assert_eq!(status, StatusCode::OK);
    let (_, t) = app.send("GET", "/studies/table1/tally", None).await;
    let count = |t: &Value, scorer: &str, strategy: &str| {
        t["tally"]["counts"]
            .as_array()
            .unwrap()
            .iter()
            .find(|c| c["scorer"] == scorer && c["strategy"] == strategy)
            .unwrap()["count"]
            .as_u64()
            .unwrap()
    };
    assert_eq!(count(&t, "aesthetic", "center"), 628);
    assert_eq!(count(&t, "aesthetic", "sequential"), 599);
    assert_eq!(count(&t, "content", "center"), 585);
    assert_eq!(count(&t, "content", "sequential"), 438);
    assert_eq!(t["tally"]["total"], 2250);

    // Replayed sessions are complete.
    let (_, s) = app.send("GET", "/sessions/fixture-07", None).await;
    assert_eq!(s["cursor"], 50);
    assert_eq!(s["completed"], true);

    drop(app);
    let again = App::open(&data);
    let (_, t2) = again.send("GET", "/studies/table1/tally", None).await;
    assert_eq!(t, t2);
}
