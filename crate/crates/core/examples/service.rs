//! Drives the HTTP API in process: validate a planogram, generate with two
//! model versions and roll back.

use std::sync::Arc;

use axum::body::Body;
use axum::http::Request;
use axum::Router;
use http_body_util::BodyExt;
use planoforge::corpus::{default_constraints, generate_corpus, synthesize_catalog, CorpusConfig};
use planoforge::diffusion::{Checkpoint, DenoiserModel, ModelConfig, ScheduleConfig};
use planoforge::interface::{router, ModelSnapshot, ServiceConfig, ServiceState};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tower::ServiceExt;

async fn call(app: &Router, method: &str, uri: &str, body: Value) -> anyhow::Result<(u16, Value)> {
    let request = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(Body::from(serde_json::to_vec(&body)?))?;
    let response = app.clone().oneshot(request).await?;
    let status = response.status().as_u16();
    let bytes = response.into_body().collect().await?.to_bytes();
    let value = if bytes.is_empty() { Value::Null } else { serde_json::from_slice(&bytes).unwrap_or(Value::Null) };
    Ok((status, value))
}

fn checkpoint(seed: u64) -> anyhow::Result<Checkpoint> {
    let model = DenoiserModel::new(ModelConfig::default(), &mut ChaCha8Rng::seed_from_u64(seed))?;
    Ok(Checkpoint::new(
        model,
        ScheduleConfig {
            timesteps: 20,
            ..ScheduleConfig::default()
        },
    ))
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let config = CorpusConfig {
        store_count: 1,
        planograms_per_store: 1,
        ..CorpusConfig::default()
    };
    let catalog = synthesize_catalog(config.catalog_size, config.rng_seed)?;
    let data = generate_corpus(&config, &default_constraints(&catalog))?;
    let state = Arc::new(ServiceState::new(data.catalog.clone(), data.constraints.clone(), ServiceConfig::default()));
    let app = router(Arc::clone(&state));

    let planogram = &data.records[0].planogram;
    let (status, report) = call(&app, "POST", "/v1/planograms/validate", json!({ "planogram": planogram })).await?;
    println!("validate -> {status}, overall {}", report["overall"]);

    state.load(ModelSnapshot::new("v1", checkpoint(1)?)?);
    state.load(ModelSnapshot::new("v2", checkpoint(2)?)?);
    let request = json!({ "fixture": planogram.fixture, "count": 2, "seed": 5 });
    for _ in 0..2 {
        let (status, body) = call(&app, "POST", "/v1/planograms/generate", request.clone()).await?;
        let rates: Vec<_> = body["planograms"]
            .as_array()
            .map(|a| a.iter().map(|p| p["report"]["overall"].as_f64().unwrap_or(f64::NAN)).collect())
            .unwrap_or_default();
        println!("generate -> {status}, version {}, overall {rates:?}", body["model_version"]);
        let (status, body) = call(&app, "POST", "/v1/admin/rollback", Value::Null).await?;
        println!("rollback -> {status}, {body}");
    }

    let (_, health) = call(&app, "GET", "/v1/health", Value::Null).await?;
    println!("health -> {health}");
    Ok(())
}
