use std::sync::Arc;

use axum::body::{to_bytes, Body};
use axum::http::{Request, StatusCode};
use axum::Router;
use memrex::catalog::{synthesize_catalog, CatalogConfig};
use memrex::memgraph::GraphJson;
use memrex::service::{AgentResources, ExplanationView, Menus, Salience, SessionHub, SessionView, TurnResponse};
use memrex::umgr::UmgrConfig;
use memrex::Umgr64;
use memrex_cli::http::{router, ErrorBody};
use serde::de::DeserializeOwned;
use serde_json::{json, Value};
use tower::ServiceExt;

fn app(with_umgr: bool) -> Router {
    let cat = synthesize_catalog(&CatalogConfig::default()).unwrap();
    let umgr = with_umgr.then(|| {
        Arc::new(
            Umgr64::new(UmgrConfig {
                hidden: 8,
                n_layers: 1,
                ..UmgrConfig::desk()
            })
            .unwrap(),
        )
    });
    router(Arc::new(SessionHub::new(
        Arc::new(cat),
        vec![],
        AgentResources { umgr, transe: None },
    )))
}

async fn call(app: &Router, method: &str, uri: &str, body: Option<Value>) -> (StatusCode, Vec<u8>) {
    let req = Request::builder().method(method).uri(uri);
    let req = match body {
        Some(b) => req
            .header("content-type", "application/json")
            .body(Body::from(b.to_string())),
        None => req.body(Body::empty()),
    }
    .unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, to_bytes(res.into_body(), 1 << 24).await.unwrap().to_vec())
}

async fn ok<T: DeserializeOwned>(app: &Router, method: &str, uri: &str, body: Option<Value>) -> T {
    let (status, bytes) = call(app, method, uri, body).await;
    assert_eq!(status, StatusCode::OK, "{}", String::from_utf8_lossy(&bytes));
    serde_json::from_slice(&bytes).unwrap()
}

async fn open(app: &Router, agent: &str, seed: u64) -> SessionView {
    let req = json!({"agent": agent, "scenario": {"kind": "generate", "seed": seed, "with_history": false}});
    ok(app, "POST", "/sessions", Some(req)).await
}

fn inform(value: u32) -> Value {
    json!({"role": "User", "act": "Inform", "value": value, "sentiment": "PosOn"})
}

#[tokio::test]
async fn rec_session_opens_with_menus_and_recommends() {
    let app = app(false);
    let v = open(&app, "rec", 5).await;
    assert!(!v.menus.items.is_empty() && !v.menus.values.is_empty());
    let menus: Menus = ok(&app, "GET", &format!("/catalog/menus?session={}", v.session_id), None).await;
    assert_eq!(menus, v.menus);
    let r: TurnResponse = ok(
        &app,
        "POST",
        &format!("/sessions/{}/turns", v.session_id),
        Some(json!({"role": "User", "act": "Greeting"})),
    )
    .await;
    let a = r.agent_action.unwrap();
    assert_eq!(a.act.name(), "Recommendation");
    let e: ExplanationView = ok(
        &app,
        "GET",
        &format!("/sessions/{}/explanations?item={}", v.session_id, a.item.unwrap().0),
        None,
    )
    .await;
    assert_eq!(e.paths, r.explanations);
    let s: Salience = ok(&app, "GET", &format!("/sessions/{}/salience", v.session_id), None).await;
    assert_eq!(s.rows.len(), 1);
    assert!(s.rows[0].scores.is_none());
}

#[tokio::test]
async fn inform_adds_one_triple_to_the_graph() {
    let app = app(true);
    let v = open(&app, "umgr", 7).await;
    let g0: GraphJson = ok(&app, "GET", &format!("/sessions/{}/graph", v.session_id), None).await;
    let value = v.menus.values[0].id.0;
    let r: TurnResponse = ok(
        &app,
        "POST",
        &format!("/sessions/{}/turns", v.session_id),
        Some(inform(value)),
    )
    .await;
    assert_eq!(r.graph_delta.len(), 1);
    assert_eq!(r.graph_version, v.graph_version + 1);
    let p = r.policy.unwrap();
    assert_eq!(p.acts.len(), 6);
    assert!(p.items.len() <= 5 && !p.items.is_empty());
    let g1: GraphJson = ok(&app, "GET", &format!("/sessions/{}/graph", v.session_id), None).await;
    assert_eq!(g1.triples.len(), g0.triples.len() + 1);
    let s: Salience = ok(&app, "GET", &format!("/sessions/{}/salience", v.session_id), None).await;
    assert_eq!(s.rows[0].scores.as_ref().unwrap().len(), s.items.len());
}

#[tokio::test]
async fn sessions_do_not_share_graphs() {
    let app = app(false);
    let a = open(&app, "random", 9).await;
    let b = open(&app, "random", 9).await;
    assert_ne!(a.session_id, b.session_id);
    let value = a.menus.values[0].id.0;
    let _: TurnResponse = ok(
        &app,
        "POST",
        &format!("/sessions/{}/turns", a.session_id),
        Some(inform(value)),
    )
    .await;
    let ga: GraphJson = ok(&app, "GET", &format!("/sessions/{}/graph", a.session_id), None).await;
    let gb: GraphJson = ok(&app, "GET", &format!("/sessions/{}/graph", b.session_id), None).await;
    assert_eq!(ga.triples.len(), gb.triples.len() + 1);
}

#[tokio::test]
async fn bad_requests_are_rejected_with_reasons() {
    let app = app(false);
    let err = |bytes: &[u8]| serde_json::from_slice::<ErrorBody>(bytes).unwrap().error;

    let (s, b) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"agent": "nope", "scenario": {"kind": "generate", "seed": 1, "with_history": false}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(err(&b).contains("random, rec, oracle, transe, umgr"));

    let (s, b) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"agent": "umgr", "scenario": {"kind": "generate", "seed": 1, "with_history": false}})),
    )
    .await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(err(&b).contains("checkpoint"));

    let (s, _) = call(
        &app,
        "POST",
        "/sessions",
        Some(json!({"agent": "rec", "scenario": {"kind": "scenario_id", "id": "missing"}})),
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);

    let v = open(&app, "rec", 3).await;
    let turns = format!("/sessions/{}/turns", v.session_id);
    let (s, b) = call(&app, "POST", &turns, Some(json!({"role": "User", "act": "Inform"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&b));
    let (s, b) = call(&app, "POST", &turns, Some(inform(999_999))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    assert!(err(&b).contains("not on the menu"));
    let (s, _) = call(&app, "POST", &turns, Some(json!({"role": "Agent", "act": "Greeting"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "GET", "/sessions/s999999/graph", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(&app, "GET", "/catalog/menus?session=s999999", None).await;
    assert_eq!(s, StatusCode::NOT_FOUND);
    let (s, _) = call(
        &app,
        "GET",
        &format!("/sessions/{}/explanations?item=999999", v.session_id),
        None,
    )
    .await;
    assert_eq!(s, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn accepted_recommendation_closes_the_session() {
    let app = app(false);
    let v = open(&app, "oracle", 11).await;
    let turns = format!("/sessions/{}/turns", v.session_id);
    let target = v.goal.items[0].id;
    let mut r: TurnResponse = ok(&app, "POST", &turns, Some(json!({"role": "User", "act": "Greeting"}))).await;
    // Answer the oracle's questions from the goal until it recommends.
    for _ in 0..5 {
        let a = r.agent_action.unwrap();
        let next = match a.act.name() {
            "Recommendation" if a.item == Some(target) => {
                json!({"role": "User", "act": "Reply", "item": target.0, "sentiment": "PosOn"})
            }
            "Recommendation" => {
                let slot = v.goal.preferences[0].slot.0;
                json!({"role": "User", "act": "OpenQuestion", "slot": slot, "item": a.item.unwrap().0, "sentiment": "NegOn"})
            }
            "OpenQuestion" => {
                let pref = v.goal.preferences.iter().find(|p| Some(p.slot) == a.slot);
                match pref {
                    Some(p) => json!({"role": "User", "act": "Answer", "value": p.id.0, "sentiment": "PosOn"}),
                    None => json!({"role": "User", "act": "Greeting"}),
                }
            }
            "YesNoQuestion" => {
                let liked = v.goal.preferences.iter().any(|p| Some(p.id) == a.value);
                let s = if liked { "PosOn" } else { "NegOn" };
                json!({"role": "User", "act": "Answer", "value": a.value.unwrap().0, "sentiment": s})
            }
            _ => json!({"role": "User", "act": "Greeting"}),
        };
        r = ok(&app, "POST", &turns, Some(next)).await;
        if r.status != memrex::service::SessionStatus::Open {
            break;
        }
    }
    assert_eq!(r.status, memrex::service::SessionStatus::Succeeded);
    let (s, b) = call(&app, "POST", &turns, Some(json!({"role": "User", "act": "Thanks"}))).await;
    assert_eq!(s, StatusCode::BAD_REQUEST, "{}", String::from_utf8_lossy(&b));
}
