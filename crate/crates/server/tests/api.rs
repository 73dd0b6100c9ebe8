use std::fs;
use std::path::Path;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use http_body_util::BodyExt;
use issuefix_core::compare::build_comparison;
use issuefix_core::ingest::{FileIssueSet, Issue, IssueCategory};
use issuefix_core::review::ReviewStore;
use serde_json::{json, Value};
use tower::ServiceExt;

const FLAGGED: &str = "src/app/main.js";
const CLEAN: &str = "src/util.js";

fn numbered(n: usize) -> String {
    (1..=n).map(|i| format!("line {i}\n")).collect()
}

fn issue(path: &str, line: u32) -> Issue {
    let leaf = path.rsplit('/').next().unwrap();
    Issue::new(
        path,
        leaf,
        line,
        "Remove this thing.",
        IssueCategory::CodeSmell,
        None,
    )
    .unwrap()
}

/// One run with a flagged file (edit far from its issue) and a clean one.
fn setup(dir: &Path) -> Arc<ReviewStore> {
    let original = dir.join("orig");
    let revised = dir.join("rev");
    for root in [&original, &revised] {
        fs::create_dir_all(root.join("src/app")).unwrap();
    }
    let main_orig = numbered(40);
    let main_rev = main_orig
        .replace("line 2\n", "line two\n")
        .replace("line 35\n", "line 35 changed\n");
    let util_orig = "a\nb\nc\n";
    let util_rev = "a\nB\nc\n";
    fs::write(original.join(FLAGGED), &main_orig).unwrap();
    fs::write(revised.join(FLAGGED), &main_rev).unwrap();
    fs::write(original.join(CLEAN), util_orig).unwrap();
    fs::write(revised.join(CLEAN), util_rev).unwrap();

    let main_set = FileIssueSet {
        file_location: FLAGGED.into(),
        issues: vec![issue(FLAGGED, 2)],
    };
    let util_set = FileIssueSet {
        file_location: CLEAN.into(),
        issues: vec![issue(CLEAN, 2)],
    };
    let comparisons = vec![
        build_comparison(&main_orig, &main_rev, &main_set, 5),
        build_comparison(util_orig, util_rev, &util_set, 5),
    ];
    assert!(comparisons[0].is_flagged());
    assert!(!comparisons[1].is_flagged());

    let store = ReviewStore::open(dir.join("review")).unwrap();
    store
        .create_run(
            "demo",
            "code_smells",
            &original,
            &revised,
            &comparisons,
            false,
        )
        .unwrap();
    Arc::new(store)
}

async fn call(
    store: &Arc<ReviewStore>,
    method: Method,
    uri: &str,
    body: Option<Value>,
) -> (StatusCode, Value) {
    let app = issuefix_server::router(store.clone(), None);
    let mut req = Request::builder().method(method).uri(uri);
    let body = match body {
        Some(v) => {
            req = req.header("content-type", "application/json");
            Body::from(v.to_string())
        }
        None => Body::empty(),
    };
    let resp = app.oneshot(req.body(body).unwrap()).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    let value = if bytes.is_empty() {
        Value::Null
    } else {
        serde_json::from_slice(&bytes)
            .unwrap_or_else(|_| Value::String(String::from_utf8_lossy(&bytes).into()))
    };
    (status, value)
}

fn enc(path: &str) -> String {
    path.replace('/', "%2F")
}

#[tokio::test]
async fn lists_runs_and_files() {
    let tmp = tempfile::tempdir().unwrap();
    let store = setup(tmp.path());

    let (status, runs) = call(&store, Method::GET, "/runs", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(runs[0]["id"], "demo");
    assert_eq!(runs[0]["flagged"], 1);
    assert_eq!(runs[0]["pending"], 2);

    let (status, state) = call(&store, Method::GET, "/runs/demo/files", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["files"].as_array().unwrap().len(), 2);
    assert_eq!(state["blocking"], json!([FLAGGED]));
}

#[tokio::test]
async fn comparison_by_encoded_path() {
    let tmp = tempfile::tempdir().unwrap();
    let store = setup(tmp.path());
    let uri = format!("/runs/demo/files/{}/comparison", enc(FLAGGED));
    let (status, cmp) = call(&store, Method::GET, &uri, None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(cmp["file_location"], FLAGGED);
    assert_eq!(cmp["flags"].as_array().unwrap().len(), 1);
    assert_eq!(cmp["decision"]["status"], "PENDING");
    assert!(cmp["metrics"]["f1"].as_f64().unwrap() > 0.9);
}

#[tokio::test]
async fn unknown_things_are_404() {
    let tmp = tempfile::tempdir().unwrap();
    let store = setup(tmp.path());
    let (status, body) = call(&store, Method::GET, "/runs/nope/files", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
    assert_eq!(body["error"], "not_found");

    let uri = format!("/runs/demo/files/{}/comparison", enc("src/missing.js"));
    assert_eq!(
        call(&store, Method::GET, &uri, None).await.0,
        StatusCode::NOT_FOUND
    );

    let uri = format!("/runs/demo/files/{}/decision", enc("src/missing.js"));
    let (status, _) = call(
        &store,
        Method::POST,
        &uri,
        Some(json!({"verdict": "ACCEPT"})),
    )
    .await;
    assert_eq!(status, StatusCode::NOT_FOUND);

    let (status, _) = call(&store, Method::GET, "/runs/..%2F..%2Fetc/files", None).await;
    assert_eq!(status, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_decisions_are_400() {
    let tmp = tempfile::tempdir().unwrap();
    let store = setup(tmp.path());
    let uri = format!("/runs/demo/files/{}/decision", enc(FLAGGED));
    for body in [
        json!({"verdict": "EDIT"}),
        json!({"verdict": "ACCEPT", "edited_content": "x"}),
        json!({"verdict": "MAYBE"}),
        json!({"nothing": true}),
    ] {
        let (status, resp) = call(&store, Method::POST, &uri, Some(body.clone())).await;
        assert_eq!(status, StatusCode::BAD_REQUEST, "{body}");
        assert_eq!(resp["error"], "validation");
    }
}

#[tokio::test]
async fn gate_blocks_then_apply_then_conflict() {
    let tmp = tempfile::tempdir().unwrap();
    let store = setup(tmp.path());

    let (status, body) = call(&store, Method::POST, "/runs/demo/apply", None).await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "gate_blocked");
    assert_eq!(body["files"], json!([FLAGGED]));

    let uri = format!("/runs/demo/files/{}/decision", enc(FLAGGED));
    let edited = "hand written\n";
    let (status, state) = call(
        &store,
        Method::POST,
        &uri,
        Some(json!({"verdict": "EDIT", "edited_content": edited, "note": "kept the fix only"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(state["blocking"], json!([]));

    let (status, applied) = call(&store, Method::POST, "/runs/demo/apply", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(applied["state"]["applied"], true);
    let final_root = Path::new(applied["final_root"].as_str().unwrap());
    assert_eq!(
        fs::read_to_string(final_root.join(FLAGGED)).unwrap(),
        edited
    );
    assert_eq!(
        fs::read_to_string(final_root.join(CLEAN)).unwrap(),
        "a\nB\nc\n"
    );

    let (status, body) = call(
        &store,
        Method::POST,
        &uri,
        Some(json!({"verdict": "REJECT"})),
    )
    .await;
    assert_eq!(status, StatusCode::CONFLICT);
    assert_eq!(body["error"], "conflict");

    // Re-applying is allowed and changes nothing.
    let (status, _) = call(&store, Method::POST, "/runs/demo/apply", None).await;
    assert_eq!(status, StatusCode::OK);
    assert_eq!(
        fs::read_to_string(final_root.join(FLAGGED)).unwrap(),
        edited
    );
}

#[tokio::test]
async fn reject_restores_original() {
    let tmp = tempfile::tempdir().unwrap();
    let store = setup(tmp.path());
    let uri = format!("/runs/demo/files/{}/decision", enc(FLAGGED));
    let (status, _) = call(
        &store,
        Method::POST,
        &uri,
        Some(json!({"verdict": "REJECT"})),
    )
    .await;
    assert_eq!(status, StatusCode::OK);
    let (_, applied) = call(&store, Method::POST, "/runs/demo/apply", None).await;
    let final_root = Path::new(applied["final_root"].as_str().unwrap());
    assert_eq!(
        fs::read_to_string(final_root.join(FLAGGED)).unwrap(),
        numbered(40)
    );
}

#[tokio::test]
async fn serves_ui_assets_as_fallback() {
    let tmp = tempfile::tempdir().unwrap();
    let store = setup(tmp.path());
    let ui = tmp.path().join("ui");
    fs::create_dir_all(&ui).unwrap();
    fs::write(ui.join("index.html"), "<h1>review</h1>").unwrap();
    let app = issuefix_server::router(store, Some(ui));
    let resp = app
        .oneshot(
            Request::builder()
                .uri("/index.html")
                .body(Body::empty())
                .unwrap(),
        )
        .await
        .unwrap();
    assert_eq!(resp.status(), StatusCode::OK);
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    assert_eq!(&bytes[..], b"<h1>review</h1>");
}
