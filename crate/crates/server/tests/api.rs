use std::collections::HashSet;
use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use http_body_util::BodyExt;
use serde_json::{json, Value};
use tinyjam_core::perf::{parse_events_csv, Instrument, LayeredPerformance, Metadata, TinyPerformance, TouchEvent};
use tinyjam_core::synth::{encode_wav, render_layers, DEFAULT_SAMPLE_RATE};
use tinyjam_core::trace::{render_layered, DEFAULT_TRACE_SIZE};
use tinyjam_server::{router, ApiError, AppState, ChainView, Created, PerformanceView};
use tinyjam_store::{Page, Store};
use tower::ServiceExt;

struct Harness {
    _dir: tempfile::TempDir,
    state: AppState,
    app: Router,
}

fn harness() -> Harness {
    let dir = tempfile::tempdir().unwrap();
    let state = AppState::new(Arc::new(Store::open(dir.path()).unwrap()));
    let app = router(state.clone());
    Harness { _dir: dir, state, app }
}

struct Reply {
    status: StatusCode,
    content_type: String,
    body: Vec<u8>,
}

impl Reply {
    fn json<T: serde::de::DeserializeOwned>(&self) -> T {
        serde_json::from_slice(&self.body).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&self.body)))
    }
}

async fn send(app: &Router, method: Method, uri: &str, body: Option<Vec<u8>>) -> Reply {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map_or_else(Body::empty, Body::from)).unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let content_type = resp
        .headers()
        .get("content-type")
        .map(|v| v.to_str().unwrap().to_string())
        .unwrap_or_default();
    let body = resp.into_body().collect().await.unwrap().to_bytes().to_vec();
    Reply {
        status,
        content_type,
        body,
    }
}

async fn get(app: &Router, uri: &str) -> Reply {
    send(app, Method::GET, uri, None).await
}

async fn post(app: &Router, uri: &str, body: &Value) -> Reply {
    send(app, Method::POST, uri, Some(serde_json::to_vec(body).unwrap())).await
}

fn events(x: f64) -> Vec<TouchEvent> {
    vec![
        TouchEvent::new(0.0, x, 0.25, 1.0, false),
        TouchEvent::new(0.05, x + 0.1, 0.3, 1.0, true),
        TouchEvent::new(0.1, x + 0.2, 0.35, 1.0, true),
        TouchEvent::new(1.5, 0.9, 0.9, 0.0, false),
    ]
}

fn body(instrument: &str, x: f64, parent: Option<&str>) -> Value {
    let perf = TinyPerformance::new(Metadata::anonymous(Instrument::Chirp), events(x));
    json!({
        "metadata": {
            "performer": "charles",
            "instrument": instrument,
            "date": "2017-03-05T10:20:30Z",
            "parent_id": parent,
        },
        "events_csv": perf.to_csv(),
    })
}

fn assert_api_error(r: &Reply, status: StatusCode, code: &str) -> ApiError {
    assert_eq!(r.status, status, "{}", String::from_utf8_lossy(&r.body));
    assert!(r.content_type.starts_with("application/json"));
    let e: ApiError = r.json();
    assert_eq!(e.status, status.as_u16());
    assert_eq!(e.code, code);
    assert!(!e.detail.is_empty());
    e
}

#[tokio::test]
async fn post_then_get_round_trips() {
    let h = harness();
    let r = post(&h.app, "/v1/performances", &body("keys", 0.2, None)).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let Created { id } = r.json();
    assert_eq!(id.len(), 32);

    let view: PerformanceView = get(&h.app, &format!("/v1/performances/{id}")).await.json();
    assert_eq!(view.metadata.id, id);
    assert_eq!(view.metadata.performer, "charles");
    assert_eq!(view.metadata.instrument, Instrument::Keys);
    assert_eq!(view.metadata.date.to_rfc3339(), "2017-03-05T10:20:30+00:00");
    assert_eq!(view.metadata.parent_id, None);
    let posted = body("keys", 0.2, None)["events_csv"].as_str().unwrap().to_string();
    assert_eq!(view.events, parse_events_csv(&posted).unwrap());
    assert_eq!(view.events_csv, body("keys", 0.2, None)["events_csv"]);
}

#[tokio::test]
async fn client_ids_are_ignored() {
    let h = harness();
    let mut b = body("pad", 0.1, None);
    b["metadata"]["id"] = json!("mine");
    let Created { id } = post(&h.app, "/v1/performances", &b).await.json();
    assert_ne!(id, "mine");
}

#[tokio::test]
async fn listing_is_newest_first_and_paged() {
    let h = harness();
    let empty: Page = get(&h.app, "/v1/performances").await.json();
    assert!(empty.items.is_empty());
    assert_eq!((empty.page, empty.page_size), (1, 20));

    let mut ids = Vec::new();
    for i in 0..25 {
        let Created { id } = post(&h.app, "/v1/performances", &body("chirp", i as f64 / 40.0, None)).await.json();
        ids.push(id);
    }
    let first: Page = get(&h.app, "/v1/performances").await.json();
    assert_eq!(first.items.len(), 20);
    assert_eq!(first.total, 25);
    let second: Page = get(&h.app, "/v1/performances?page=2").await.json();
    assert_eq!(second.items.len(), 5);
    let all: HashSet<String> = first.items.iter().chain(&second.items).map(|l| l.metadata.id.clone()).collect();
    assert_eq!(all, ids.iter().cloned().collect());
    assert!(first.items[0].created_at >= second.items[4].created_at);

    let big: Page = get(&h.app, "/v1/performances?page_size=500").await.json();
    assert_eq!(big.page_size, 100);
    assert_eq!(big.items.len(), 25);

    for bad in ["page=0", "page=x", "page_size=-1"] {
        let r = get(&h.app, &format!("/v1/performances?{bad}")).await;
        assert_api_error(&r, StatusCode::BAD_REQUEST, "bad_request");
    }
}

#[tokio::test]
async fn reply_chain_audio_matches_direct_render() {
    let h = harness();
    let Created { id: root } = post(&h.app, "/v1/performances", &body("chirp", 0.1, None)).await.json();
    let r = post(&h.app, &format!("/v1/performances/{root}/reply"), &body("wub", 0.5, None)).await;
    assert_eq!(r.status, StatusCode::CREATED);
    let Created { id: leaf } = r.json();

    let chain: ChainView = get(&h.app, &format!("/v1/performances/{leaf}/chain")).await.json();
    assert_eq!(chain.depth, 2);
    assert_eq!(chain.layers[0].id, root);
    assert_eq!(chain.layers[1].parent_id.as_deref(), Some(root.as_str()));
    let kids: Vec<String> = get(&h.app, &format!("/v1/performances/{root}/children")).await.json();
    assert_eq!(kids, vec![leaf.clone()]);

    let layers = LayeredPerformance::new(vec![
        h.state.store().get(&root).unwrap(),
        h.state.store().get(&leaf).unwrap(),
    ])
    .unwrap();
    let expected = encode_wav(&render_layers(&layers, DEFAULT_SAMPLE_RATE).unwrap()).unwrap();

    let r = get(&h.app, &format!("/v1/performances/{leaf}/audio.wav")).await;
    assert_eq!(r.status, StatusCode::OK);
    assert_eq!(r.content_type, "audio/wav");
    assert!(r.body == expected, "served audio differs from the direct render");
    // second request is served from the cache and is identical
    let again = get(&h.app, &format!("/v1/performances/{leaf}/audio.wav")).await;
    assert!(again.body == expected);
    assert_eq!(h.state.render_count(), 1);

    let png = get(&h.app, &format!("/v1/performances/{leaf}/trace.png")).await;
    assert_eq!(png.content_type, "image/png");
    let direct = render_layered(&layers, DEFAULT_TRACE_SIZE).unwrap().encode_png().unwrap();
    assert!(png.body == direct);
}

#[tokio::test]
async fn concurrent_renders_coalesce() {
    let h = harness();
    let Created { id } = post(&h.app, "/v1/performances", &body("strings", 0.3, None)).await.json();
    let uri = format!("/v1/performances/{id}/audio.wav");
    let tasks: Vec<_> = (0..8)
        .map(|_| {
            let app = h.app.clone();
            let uri = uri.clone();
            tokio::spawn(async move { get(&app, &uri).await.body })
        })
        .collect();
    let mut bodies = Vec::new();
    for t in tasks {
        bodies.push(t.await.unwrap());
    }
    assert!(bodies.windows(2).all(|w| w[0] == w[1]));
    assert_eq!(h.state.render_count(), 1);
}

#[tokio::test]
async fn error_statuses_carry_api_errors() {
    let h = harness();
    let r = post(&h.app, "/v1/performances/ffff/reply", &body("chirp", 0.1, None)).await;
    assert_api_error(&r, StatusCode::NOT_FOUND, "not_found");

    let r = post(&h.app, "/v1/performances", &body("chirp", 0.1, Some("ffff"))).await;
    assert_api_error(&r, StatusCode::NOT_FOUND, "unknown_parent");

    for uri in ["/v1/performances/ffff", "/v1/performances/ffff/audio.wav", "/v1/performances/ffff/trace.png", "/v1/performances/ffff/chain", "/nowhere"] {
        assert_api_error(&get(&h.app, uri).await, StatusCode::NOT_FOUND, "not_found");
    }

    let r = send(&h.app, Method::POST, "/v1/performances", Some(b"{not json".to_vec())).await;
    assert_api_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "malformed_body");
    let r = post(&h.app, "/v1/performances", &json!({"metadata": {"instrument": "chirp"}})).await;
    assert_api_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "malformed_body");
    let r = post(&h.app, "/v1/performances", &json!({"metadata": {"instrument": "chirp"}, "events_csv": "a,b\n1,2\n"})).await;
    assert_api_error(&r, StatusCode::UNPROCESSABLE_ENTITY, "malformed_body");

    let r = post(&h.app, "/v1/performances", &body("banjo", 0.1, None)).await;
    assert_api_error(&r, StatusCode::BAD_REQUEST, "bad_request");

    let mut b = body("chirp", 0.95, None);
    b["events_csv"] = json!("time,x,y,z,moving\n0.0,1.3,0.5,0,0\n6.0,0.5,0.5,0,1\n");
    let e = assert_api_error(
        &post(&h.app, "/v1/performances", &b).await,
        StatusCode::BAD_REQUEST,
        "validation_failed",
    );
    let v = e.violations.unwrap();
    assert_eq!(v.len(), 2);
    assert!(e.detail.contains("x out of range at index 0"));

    let r = send(&h.app, Method::DELETE, "/v1/performances", None).await;
    assert_api_error(&r, StatusCode::METHOD_NOT_ALLOWED, "method_not_allowed");

    let Created { id } = post(&h.app, "/v1/performances", &body("chirp", 0.1, None)).await.json();
    let r = post(&h.app, &format!("/v1/performances/{id}/reply"), &body("chirp", 0.1, Some("other"))).await;
    assert_api_error(&r, StatusCode::BAD_REQUEST, "bad_request");
    assert_eq!(h.state.store().len(), 1);
}

#[tokio::test]
async fn fifty_concurrent_posts_are_all_listed() {
    let h = harness();
    let tasks: Vec<_> = (0..50)
        .map(|i| {
            let app = h.app.clone();
            tokio::spawn(async move { post(&app, "/v1/performances", &body("drums", i as f64 / 70.0, None)).await })
        })
        .collect();
    let mut ids = HashSet::new();
    for t in tasks {
        let r = t.await.unwrap();
        assert_eq!(r.status, StatusCode::CREATED);
        ids.insert(r.json::<Created>().id);
    }
    assert_eq!(ids.len(), 50);
    let page: Page = get(&h.app, "/v1/performances?page_size=100").await.json();
    assert_eq!(page.total, 50);
    let listed: HashSet<String> = page.items.into_iter().map(|l| l.metadata.id).collect();
    assert_eq!(listed, ids);
}

#[tokio::test]
async fn reads_are_idempotent() {
    let h = harness();
    let Created { id } = post(&h.app, "/v1/performances", &body("quack", 0.4, None)).await.json();
    for uri in [
        "/v1/performances".to_string(),
        format!("/v1/performances/{id}"),
        format!("/v1/performances/{id}/chain"),
        format!("/v1/performances/{id}/trace.png"),
        "/v1/report".to_string(),
    ] {
        let a = get(&h.app, &uri).await;
        let b = get(&h.app, &uri).await;
        assert_eq!(a.status, StatusCode::OK, "{uri}");
        assert!(a.body == b.body, "{uri}");
    }
}

#[tokio::test]
async fn report_covers_the_store() {
    let h = harness();
    let empty: Value = get(&h.app, "/v1/report").await.json();
    assert_eq!(empty["n_performances"], 0);
    let Created { id } = post(&h.app, "/v1/performances", &body("keys", 0.2, None)).await.json();
    post(&h.app, &format!("/v1/performances/{id}/reply"), &body("pad", 0.6, None)).await;
    let r: Value = get(&h.app, "/v1/report").await.json();
    assert_eq!(r["n_performances"], 2);
    assert_eq!(r["n_events"], 8);
    assert_eq!(r["replies"]["n_replies"], 1);
}

#[tokio::test]
async fn cors_is_permissive() {
    let h = harness();
    let req = Request::builder()
        .method(Method::OPTIONS)
        .uri("/v1/performances")
        .header("origin", "http://example.com")
        .header("access-control-request-method", "POST")
        .body(Body::empty())
        .unwrap();
    let resp = h.app.clone().oneshot(req).await.unwrap();
    assert!(resp.status().is_success());
    assert_eq!(resp.headers()["access-control-allow-origin"], "*");
}
