//! JSON HTTP API over [`App`]. Agent and store work runs on the blocking
//! pool so long model calls do not stall other requests.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use tower_http::cors::{Any, CorsLayer};

use crate::app::{
    App, AppError, BundleExportRequest, BundleImportRequest, CartRequest, CreateCollectionRequest, ErrorKind,
    IngestRequest, InsertRequest, SearchRequest,
};

type Shared = Arc<App>;

impl IntoResponse for AppError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let body = serde_json::json!({
            "error_code": self.error_code,
            "message": self.message,
            "detail": self.detail,
        });
        (status, Json(body)).into_response()
    }
}

fn parse<T: DeserializeOwned>(body: &Bytes) -> Result<T, AppError> {
    if body.is_empty() {
        return Err(AppError::validation("request body is empty"));
    }
    serde_json::from_slice(body).map_err(|e| AppError::validation(e.to_string()))
}

/// Runs `f` on the blocking pool and renders its result.
async fn blocking<T, F>(app: Shared, status: StatusCode, f: F) -> Response
where
    T: Serialize + Send + 'static,
    F: FnOnce(&App) -> Result<T, AppError> + Send + 'static,
{
    let outcome = tokio::task::spawn_blocking(move || f(&app)).await;
    match outcome {
        Ok(Ok(value)) => (status, Json(value)).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => AppError::new(ErrorKind::Internal, "worker_failure", e.to_string()).into_response(),
    }
}

async fn list_collections(State(app): State<Shared>) -> Response {
    blocking(app, StatusCode::OK, |a| a.list_collections()).await
}

async fn create_collection(State(app): State<Shared>, body: Bytes) -> Response {
    let req: CreateCollectionRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::CREATED, move |a| a.create_collection(req)).await
}

async fn delete_collection(State(app): State<Shared>, Path(name): Path<String>) -> Response {
    blocking(app, StatusCode::OK, move |a| a.delete_collection(&name)).await
}

async fn list_objects(State(app): State<Shared>, Path(name): Path<String>) -> Response {
    blocking(app, StatusCode::OK, move |a| a.list_objects(&name)).await
}

async fn insert_object(State(app): State<Shared>, Path(name): Path<String>, body: Bytes) -> Response {
    let req: InsertRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::CREATED, move |a| a.insert_object(&name, req)).await
}

async fn ingest(State(app): State<Shared>, Path(name): Path<String>, body: Bytes) -> Response {
    let req: IngestRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::OK, move |a| a.ingest(&name, req)).await
}

async fn build_index(State(app): State<Shared>, Path(name): Path<String>) -> Response {
    blocking(app, StatusCode::OK, move |a| a.build_index(&name)).await
}

fn search_request(name: String, params: &HashMap<String, String>) -> Result<SearchRequest, AppError> {
    fn num<T: std::str::FromStr>(params: &HashMap<String, String>, key: &str) -> Result<Option<T>, AppError> {
        params
            .get(key)
            .map(|v| v.parse::<T>().map_err(|_| AppError::validation(format!("{key} must be a number"))))
            .transpose()
    }
    let query = params.get("q").cloned().unwrap_or_default();
    let diversify = match params.get("diversify").map(String::as_str) {
        None | Some("false") | Some("0") => false,
        Some("true") | Some("1") | Some("") => true,
        Some(_) => return Err(AppError::validation("diversify must be true or false")),
    };
    Ok(SearchRequest {
        collection: name,
        query,
        k: num(params, "k")?,
        diversify,
        lambda: num(params, "lambda")?,
        pool: num(params, "pool")?,
    })
}

async fn search(State(app): State<Shared>, Path(name): Path<String>, Query(params): Query<HashMap<String, String>>) -> Response {
    let req = match search_request(name, &params) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::OK, move |a| a.search(req)).await
}

async fn projection(State(app): State<Shared>, Path(name): Path<String>) -> Response {
    blocking(app, StatusCode::OK, move |a| a.projection(&name)).await
}

async fn bundle_export(State(app): State<Shared>, Path(name): Path<String>, body: Bytes) -> Response {
    let req: BundleExportRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::OK, move |a| a.bundle_export(&name, req)).await
}

async fn bundle_import(State(app): State<Shared>, body: Bytes) -> Response {
    let req: BundleImportRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::CREATED, move |a| a.bundle_import(req)).await
}

async fn agent(State(app): State<Shared>, Path(name): Path<String>, body: Bytes) -> Response {
    let value: Value = match parse(&body) {
        Ok(v) => v,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::OK, move |a| a.call_agent(&name, value)).await
}

async fn get_cart(State(app): State<Shared>) -> Response {
    Json(app.cart()).into_response()
}

async fn post_cart(State(app): State<Shared>, body: Bytes) -> Response {
    let req: CartRequest = match parse(&body) {
        Ok(r) => r,
        Err(e) => return e.into_response(),
    };
    blocking(app, StatusCode::OK, move |a| a.cart_update(req)).await
}

async fn config(State(app): State<Shared>) -> Response {
    Json(app.config()).into_response()
}

async fn wrappers(State(app): State<Shared>) -> Response {
    Json(app.wrappers()).into_response()
}

async fn not_found() -> Response {
    AppError::new(ErrorKind::NotFound, "unknown_route", "no such endpoint").into_response()
}

pub fn router(app: Shared) -> Router {
    let origin = HeaderValue::from_str(&app.settings().cors_origin).unwrap_or(HeaderValue::from_static("*"));
    let cors = CorsLayer::new()
        .allow_origin(origin)
        .allow_methods([Method::GET, Method::POST, Method::DELETE])
        .allow_headers(Any);
    Router::new()
        .route("/collections", get(list_collections).post(create_collection))
        .route("/collections/{name}", axum::routing::delete(delete_collection))
        .route("/collections/{name}/objects", get(list_objects).post(insert_object))
        .route("/collections/{name}/ingest", post(ingest))
        .route("/collections/{name}/index", post(build_index))
        .route("/collections/{name}/search", get(search))
        .route("/collections/{name}/projection", get(projection))
        .route("/collections/{name}/bundle", post(bundle_export))
        .route("/bundles/import", post(bundle_import))
        .route("/agents/{agent}", post(agent))
        .route("/cart", get(get_cart).post(post_cart))
        .route("/config", get(config))
        .route("/wrappers", get(wrappers))
        .fallback(not_found)
        .layer(cors)
        .with_state(app)
}

/// Serves until interrupted.
pub async fn serve(app: Shared, port: u16) -> std::io::Result<()> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{addr}");
    axum::serve(listener, router(app))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
