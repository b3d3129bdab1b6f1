//! Local JSON API over the same renderers as the CLI.
//!
//! 400 for malformed requests, 422 with a diagnostic for domain errors, 503
//! with a progress fraction while a mesh the request needs is being built.

use std::net::SocketAddr;
use std::sync::Arc;

use axum::body::Body;
use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use cusp_atlas::export::SCHEMA;
use serde::{Deserialize, Serialize};

use crate::ops::{self, render, Context, CurvesParams, CuspsParams, DkParams, Fetched, Format, MeshParams, PlanParams, TraceParams, Wait};
use crate::{Failure, OpResult};

pub const DEFAULT_PORT: u16 = 8737;

type Ctx = State<Arc<Context>>;

pub fn router(ctx: Arc<Context>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/geometry", get(geometry))
        .route("/api/dk", post(dk))
        .route("/api/cs-mesh", get(cs_mesh))
        .route("/api/cusps", get(cusps))
        .route("/api/trace", post(trace))
        .route("/api/plan", post(plan))
        .route("/api/singular-curves", get(singular_curves))
        .fallback(not_found)
        .with_state(ctx)
}

/// Serves until interrupted.
pub async fn serve(ctx: Arc<Context>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("cusp-atlas service listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(ctx))
        .with_graceful_shutdown(shutdown())
        .await
}

async fn shutdown() {
    #[cfg(unix)]
    {
        use tokio::signal::unix::{signal, SignalKind};
        match signal(SignalKind::terminate()) {
            Ok(mut term) => tokio::select! {
                _ = tokio::signal::ctrl_c() => {}
                _ = term.recv() => {}
            },
            Err(_) => {
                let _ = tokio::signal::ctrl_c().await;
            }
        }
    }
    #[cfg(not(unix))]
    {
        let _ = tokio::signal::ctrl_c().await;
    }
}

fn bytes(status: StatusCode, content_type: &'static str, body: Vec<u8>) -> Response {
    Response::builder().status(status).header(header::CONTENT_TYPE, content_type).body(Body::from(body)).expect("static headers")
}

fn json(status: StatusCode, body: Vec<u8>) -> Response {
    bytes(status, "application/json", body)
}

fn failure(f: &Failure) -> Response {
    let status = match f {
        Failure::Usage(_) => StatusCode::BAD_REQUEST,
        Failure::Domain(_) => StatusCode::UNPROCESSABLE_ENTITY,
    };
    json(status, f.diagnostic())
}

fn malformed(msg: String) -> Response {
    failure(&Failure::Usage(msg))
}

#[derive(Serialize)]
struct BuildingDoc {
    schema: &'static str,
    status: &'static str,
    progress: f64,
}

fn respond(r: OpResult<Fetched>, content_type: &'static str) -> Response {
    match r {
        Ok(Fetched::Ready(b)) => bytes(StatusCode::OK, content_type, b.to_vec()),
        Ok(Fetched::Building(p)) => {
            let mut res = json(StatusCode::SERVICE_UNAVAILABLE, render(&BuildingDoc { schema: SCHEMA, status: "building", progress: p }));
            res.headers_mut().insert(header::RETRY_AFTER, "1".parse().unwrap());
            res
        }
        Err(f) => failure(&f),
    }
}

/// Runs a renderer off the async runtime.
async fn blocking<F>(ctx: Arc<Context>, content_type: &'static str, f: F) -> Response
where
    F: FnOnce(&Context) -> OpResult<Fetched> + Send + 'static,
{
    match tokio::task::spawn_blocking(move || f(&ctx)).await {
        Ok(r) => respond(r, content_type),
        Err(e) => json(StatusCode::INTERNAL_SERVER_ERROR, format!("{{\"error\":\"{e}\"}}\n").into_bytes()),
    }
}

fn ready(b: Vec<u8>) -> Fetched {
    Fetched::Ready(Arc::new(b))
}

#[derive(Serialize)]
struct Health {
    schema: &'static str,
    status: &'static str,
    version: &'static str,
}

async fn health() -> Response {
    json(StatusCode::OK, render(&Health { schema: SCHEMA, status: "ok", version: env!("CARGO_PKG_VERSION") }))
}

async fn geometry(State(ctx): Ctx) -> Response {
    json(StatusCode::OK, ops::geometry_doc(&ctx))
}

async fn dk(State(ctx): Ctx, body: Result<Json<DkParams>, JsonRejection>) -> Response {
    match body {
        Ok(Json(p)) => blocking(ctx, "application/json", move |c| ops::dk_doc(c, &p).map(ready)).await,
        Err(e) => malformed(e.body_text()),
    }
}

#[derive(Debug, Deserialize)]
pub struct MeshQuery {
    pub rho1: f64,
    pub aspect: u8,
    pub n: Option<usize>,
    pub format: Option<Format>,
}

async fn cs_mesh(State(ctx): Ctx, q: Result<Query<MeshQuery>, QueryRejection>) -> Response {
    let Query(q) = match q {
        Ok(q) => q,
        Err(e) => return malformed(e.body_text()),
    };
    let format = q.format.unwrap_or_default();
    let p = MeshParams { rho1: q.rho1, aspect: q.aspect, n: q.n, window: None, format };
    let ct = if format == Format::Obj { "text/plain" } else { "application/json" };
    blocking(ctx, ct, move |c| ops::mesh_doc(c, &p, Wait::Poll)).await
}

async fn cusps(State(ctx): Ctx, q: Result<Query<CuspsParams>, QueryRejection>) -> Response {
    match q {
        Ok(Query(p)) => blocking(ctx, "application/json", move |c| ops::cusps_doc(c, &p).map(Fetched::Ready)).await,
        Err(e) => malformed(e.body_text()),
    }
}

async fn trace(State(ctx): Ctx, body: Result<Json<TraceParams>, JsonRejection>) -> Response {
    match body {
        Ok(Json(p)) => blocking(ctx, "application/json", move |c| ops::trace_doc(c, &p).map(Fetched::Ready)).await,
        Err(e) => malformed(e.body_text()),
    }
}

async fn plan(State(ctx): Ctx, body: Result<Json<PlanParams>, JsonRejection>) -> Response {
    match body {
        Ok(Json(p)) => blocking(ctx, "application/json", move |c| ops::plan_doc(c, &p, Wait::Poll)).await,
        Err(e) => malformed(e.body_text()),
    }
}

async fn singular_curves(State(ctx): Ctx, q: Result<Query<CurvesParams>, QueryRejection>) -> Response {
    match q {
        Ok(Query(p)) => blocking(ctx, "application/json", move |c| ops::curves_doc(c, &p).map(Fetched::Ready)).await,
        Err(e) => malformed(e.body_text()),
    }
}

/// Unknown routes answer with a JSON diagnostic too.
async fn not_found() -> Response {
    json(StatusCode::NOT_FOUND, Failure::Usage("no such endpoint".into()).diagnostic())
}
