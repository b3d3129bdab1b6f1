#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};
use std::sync::Arc;
use std::time::Duration;

use axum::body::Body;
use axum::http::{Method, Request, StatusCode};
use axum::Router;
use cusp_atlas_cli::cache::{Cache, CACHE_ENV};
use cusp_atlas_cli::config::ProjectConfig;
use cusp_atlas_cli::ops::Context;
use http_body_util::BodyExt;
use tower::ServiceExt;

pub const LEG: &str = r#"{"rho1": 17, "waypoints": [[19, 17], [20.5, 18], [21, 20]], "closed": false}"#;

pub fn app() -> Router {
    let ctx = Context::new(ProjectConfig::default(), Arc::new(Cache::new(None))).unwrap();
    cusp_atlas_cli::service::router(Arc::new(ctx))
}

pub fn cli(args: &[&str], cache: Option<&Path>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_cusp-atlas"));
    c.args(args);
    match cache {
        Some(d) => c.env(CACHE_ENV, d),
        None => c.env_remove(CACHE_ENV),
    };
    c.output().expect("binary runs")
}

pub async fn call(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>) {
    let mut req = Request::builder().method(method).uri(uri);
    if body.is_some() {
        req = req.header("content-type", "application/json");
    }
    let req = req.body(body.map(|b| Body::from(b.to_string())).unwrap_or_else(Body::empty)).unwrap();
    let res = app.clone().oneshot(req).await.unwrap();
    let status = res.status();
    (status, res.into_body().collect().await.unwrap().to_bytes().to_vec())
}

/// Repeats a request while it answers 503, returning the first other answer
/// and how many 503s came before it.
pub async fn settle(app: &Router, method: Method, uri: &str, body: Option<&str>) -> (StatusCode, Vec<u8>, usize) {
    let mut busy = 0;
    loop {
        let (s, b) = call(app, method.clone(), uri, body).await;
        if s != StatusCode::SERVICE_UNAVAILABLE || busy > 3000 {
            return (s, b, busy);
        }
        busy += 1;
        tokio::time::sleep(Duration::from_millis(20)).await;
    }
}

/// One sampled parameter set: CLI arguments and the equivalent request.
pub struct Case {
    pub name: &'static str,
    pub args: Vec<String>,
    pub method: Method,
    pub uri: &'static str,
    pub body: Option<String>,
}

fn case(name: &'static str, args: &[&str], method: Method, uri: &'static str, body: Option<String>) -> Case {
    Case { name, args: args.iter().map(|s| s.to_string()).collect(), method, uri, body }
}

/// Ten parameter sets covering every endpoint with a CLI counterpart.
pub fn cases(trajectory_file: &Path) -> Vec<Case> {
    let t = trajectory_file.to_str().unwrap();
    vec![
        case("dk reference", &["dk", "--q", "17,19,17"], Method::POST, "/api/dk", Some(r#"{"q": [17, 19, 17]}"#.into())),
        case("dk unreachable", &["dk", "--q", "17,100,17"], Method::POST, "/api/dk", Some(r#"{"q": [17, 100, 17]}"#.into())),
        case("dk off-reference", &["dk", "--q", "20,15,22"], Method::POST, "/api/dk", Some(r#"{"q": [20, 15, 22]}"#.into())),
        case("cusps 17", &["cusps", "--rho1", "17"], Method::GET, "/api/cusps?rho1=17", None),
        case("cusps 14", &["cusps", "--rho1", "14"], Method::GET, "/api/cusps?rho1=14", None),
        case("curves", &["singular-curves", "--rho1", "17", "--n", "128"], Method::GET, "/api/singular-curves?rho1=17&n=128", None),
        case("mesh", &["cs-mesh", "--rho1", "17", "--aspect", "2", "--n", "64"], Method::GET, "/api/cs-mesh?rho1=17&aspect=2&n=64", None),
        case("mesh obj", &["cs-mesh", "--rho1", "17", "--aspect", "1", "--n", "64", "--format", "obj"], Method::GET, "/api/cs-mesh?rho1=17&aspect=1&n=64&format=obj", None),
        case("trace", &["trace", "--trajectory", t, "--start-mode", "1"], Method::POST, "/api/trace", Some(format!(r#"{{"trajectory": {LEG}, "start_mode": 1}}"#))),
        case("plan", &["plan", "--q", "17,19,17", "--from", "2", "--to", "0"], Method::POST, "/api/plan", Some(r#"{"joint": [17, 19, 17], "from_mode": 2, "to_mode": 0}"#.into())),
    ]
}

/// Runs every case through both front ends; returns the names that differ.
pub async fn parity_mismatches(dir: &Path) -> Vec<String> {
    let traj = dir.join("leg.json");
    std::fs::write(&traj, LEG).unwrap();
    let app = app();
    let mut bad = vec![];
    for c in cases(&traj) {
        let args: Vec<&str> = c.args.iter().map(String::as_str).collect();
        let out = cli(&args, None);
        let (status, body, _) = settle(&app, c.method.clone(), c.uri, c.body.as_deref()).await;
        if !out.status.success() || status != StatusCode::OK || out.stdout != body {
            bad.push(format!("{} (exit {:?}, http {status})", c.name, out.status.code()));
        }
    }
    bad
}
