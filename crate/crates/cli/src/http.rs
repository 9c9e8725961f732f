//! JSON-over-HTTP transport for [`SessionHub`].

use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use memrex::dialog::DialogAction;
use memrex::memgraph::GraphJson;
use memrex::service::{CreateSession, ExplanationView, Menus, Salience, SessionHub, SessionView, TurnResponse};
use memrex::{Error, ItemId};
use serde::{Deserialize, Serialize};

#[derive(Debug, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        Self(e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self.0 {
            Error::Lookup(_) => StatusCode::NOT_FOUND,
            Error::Session(_)
            | Error::Shape(_)
            | Error::Protocol(_)
            | Error::Ontology(_)
            | Error::Config(_)
            | Error::Parse { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (
            status,
            Json(ErrorBody {
                error: self.0.to_string(),
            }),
        )
            .into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Deserialize)]
struct ItemQuery {
    item: ItemId,
}

#[derive(Debug, Deserialize)]
struct SessionQuery {
    session: String,
}

pub fn router(hub: Arc<SessionHub>) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}/turns", post(turn))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/explanations", get(explanations))
        .route("/sessions/{id}/salience", get(salience))
        .route("/catalog/menus", get(menus))
        .with_state(hub)
}

async fn create(State(hub): State<Arc<SessionHub>>, Json(req): Json<CreateSession>) -> ApiResult<SessionView> {
    Ok(Json(hub.create(&req)?))
}

async fn turn(
    State(hub): State<Arc<SessionHub>>,
    Path(id): Path<String>,
    Json(action): Json<DialogAction>,
) -> ApiResult<TurnResponse> {
    Ok(Json(hub.post_turn(&id, action)?))
}

async fn graph(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>) -> ApiResult<GraphJson> {
    Ok(Json(hub.with(&id, |s| s.graph_json())?))
}

async fn explanations(
    State(hub): State<Arc<SessionHub>>,
    Path(id): Path<String>,
    Query(q): Query<ItemQuery>,
) -> ApiResult<ExplanationView> {
    Ok(Json(hub.with(&id, |s| s.explanations(q.item))??))
}

async fn salience(State(hub): State<Arc<SessionHub>>, Path(id): Path<String>) -> ApiResult<Salience> {
    Ok(Json(hub.with(&id, |s| s.salience())?))
}

async fn menus(State(hub): State<Arc<SessionHub>>, Query(q): Query<SessionQuery>) -> ApiResult<Menus> {
    Ok(Json(hub.with(&q.session, |s| s.menus())?))
}

pub async fn serve(hub: Arc<SessionHub>, port: u16) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(("0.0.0.0", port)).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(hub)).await?;
    Ok(())
}
