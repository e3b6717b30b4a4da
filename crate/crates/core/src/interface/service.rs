use std::collections::{BTreeMap, VecDeque};
use std::net::SocketAddr;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::{MatchedPath, Request, State};
use axum::http::{HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::constraints::{validate, ConstraintSet, ValidationReport};
use crate::diffusion::{sample, Checkpoint, DiffusionError, NoiseSchedule};
use crate::domain::{Catalog, Fixture, Planogram, StructuralViolation};

/// Largest `count` accepted by the generate endpoint.
pub const MAX_GENERATE: usize = 256;
const LATENCY_WINDOW: usize = 4096;

/// An immutable, versioned model ready to sample from.
#[derive(Debug)]
pub struct ModelSnapshot {
    pub version: String,
    pub checkpoint: Checkpoint,
    schedule: NoiseSchedule,
}

impl ModelSnapshot {
    pub fn new(version: impl Into<String>, checkpoint: Checkpoint) -> Result<Self, DiffusionError> {
        Ok(Self {
            version: version.into(),
            schedule: checkpoint.schedule.build()?,
            checkpoint,
        })
    }

    /// Samples `count` planograms and validates each.
    pub fn generate(
        &self,
        fixture: &Fixture,
        count: usize,
        seed: u64,
        catalog: &Catalog,
        constraints: &ConstraintSet,
    ) -> Result<Vec<GeneratedPlanogram>, ServiceError> {
        sample(&self.checkpoint.model, &self.schedule, fixture, catalog, seed, count)?
            .into_iter()
            .map(|planogram| {
                let report = validate(&planogram, constraints, catalog).map_err(|e| ServiceError::Internal(e.to_string()))?;
                Ok(GeneratedPlanogram { planogram, report })
            })
            .collect()
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    /// When set, every request must carry it in `x-api-key`.
    pub api_key: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("malformed request: {0}")]
    BadRequest(String),
    #[error("structural violations")]
    Structure(Vec<StructuralViolation>),
    #[error("no model loaded")]
    NoModel,
    #[error("no previous model version to roll back to")]
    NoPrevious,
    #[error("missing or wrong api key")]
    Unauthorized,
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<DiffusionError> for ServiceError {
    fn from(e: DiffusionError) -> Self {
        match e {
            DiffusionError::Domain(d) => ServiceError::BadRequest(d.to_string()),
            DiffusionError::Shape(m) => ServiceError::BadRequest(m),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (status, code) = match &self {
            ServiceError::BadRequest(_) => (StatusCode::BAD_REQUEST, "bad-request"),
            ServiceError::Structure(_) => (StatusCode::UNPROCESSABLE_ENTITY, "structural-violation"),
            ServiceError::NoModel => (StatusCode::SERVICE_UNAVAILABLE, "no-model"),
            ServiceError::NoPrevious => (StatusCode::CONFLICT, "no-previous-version"),
            ServiceError::Unauthorized => (StatusCode::UNAUTHORIZED, "unauthorized"),
            ServiceError::Internal(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        };
        let mut body = json!({ "error": code, "message": self.to_string() });
        if let ServiceError::Structure(v) = &self {
            body["violations"] = json!(v.iter().map(|x| json!({ "detail": x.to_string(), "violation": x })).collect::<Vec<_>>());
        }
        (status, Json(body)).into_response()
    }
}

#[derive(Default)]
struct Slots {
    active: Option<Arc<ModelSnapshot>>,
    previous: Option<Arc<ModelSnapshot>>,
}

#[derive(Default)]
struct EndpointMetrics {
    requests: u64,
    errors: u64,
    latencies_ms: VecDeque<f64>,
}

/// Shared service state: catalog, default constraints, the two model slots
/// and request counters.
pub struct ServiceState {
    pub catalog: Catalog,
    pub constraints: ConstraintSet,
    pub config: ServiceConfig,
    slots: RwLock<Slots>,
    metrics: Mutex<BTreeMap<String, EndpointMetrics>>,
}

impl ServiceState {
    pub fn new(catalog: Catalog, constraints: ConstraintSet, config: ServiceConfig) -> Self {
        Self {
            catalog,
            constraints,
            config,
            slots: RwLock::default(),
            metrics: Mutex::default(),
        }
    }

    /// Makes `snapshot` active; the current one becomes the rollback target.
    pub fn load(&self, snapshot: ModelSnapshot) {
        let mut slots = self.slots.write().expect("slots lock");
        slots.previous = slots.active.take();
        slots.active = Some(Arc::new(snapshot));
        tracing::info!(version = %slots.active.as_ref().expect("just set").version, "model loaded");
    }

    /// Restores the previous snapshot. Requests already running keep the
    /// snapshot they started with.
    pub fn rollback(&self) -> Result<Arc<ModelSnapshot>, ServiceError> {
        let mut slots = self.slots.write().expect("slots lock");
        let previous = slots.previous.take().ok_or(ServiceError::NoPrevious)?;
        slots.active = Some(Arc::clone(&previous));
        tracing::info!(version = %previous.version, "rolled back");
        Ok(previous)
    }

    pub fn active(&self) -> Option<Arc<ModelSnapshot>> {
        self.slots.read().expect("slots lock").active.clone()
    }

    pub fn versions(&self) -> (Option<String>, Option<String>) {
        let slots = self.slots.read().expect("slots lock");
        (
            slots.active.as_ref().map(|s| s.version.clone()),
            slots.previous.as_ref().map(|s| s.version.clone()),
        )
    }

    fn record(&self, endpoint: &str, ok: bool, ms: f64) {
        let mut metrics = self.metrics.lock().expect("metrics lock");
        let m = metrics.entry(endpoint.to_string()).or_default();
        m.requests += 1;
        m.errors += u64::from(!ok);
        if m.latencies_ms.len() == LATENCY_WINDOW {
            m.latencies_ms.pop_front();
        }
        m.latencies_ms.push_back(ms);
    }

    /// `key value` lines: request and error counts plus latency percentiles
    /// over the most recent requests of each endpoint.
    pub fn render_metrics(&self) -> String {
        let metrics = self.metrics.lock().expect("metrics lock");
        let mut out = String::new();
        for (endpoint, m) in metrics.iter() {
            let name = endpoint.trim_start_matches("/v1/").replace('/', "_");
            out.push_str(&format!("{name}_requests_total {}\n", m.requests));
            out.push_str(&format!("{name}_errors_total {}\n", m.errors));
            let mut sorted: Vec<f64> = m.latencies_ms.iter().copied().collect();
            sorted.sort_by(f64::total_cmp);
            for (label, p) in [("p50", 0.5), ("p95", 0.95), ("p99", 0.99)] {
                let rank = ((p * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
                out.push_str(&format!("{name}_latency_ms_{label} {:.3}\n", sorted[rank - 1]));
            }
        }
        out
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub fixture: Fixture,
    pub count: usize,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratedPlanogram {
    pub planogram: Planogram,
    pub report: ValidationReport,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub model_version: String,
    pub planograms: Vec<GeneratedPlanogram>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateRequest {
    pub planogram: Planogram,
    /// Defaults to the service's constraint set.
    #[serde(default)]
    pub constraints: Option<ConstraintSet>,
}

fn parse<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(e.to_string()))
}

async fn generate(State(state): State<Arc<ServiceState>>, body: Bytes) -> Result<Json<GenerateResponse>, ServiceError> {
    let request: GenerateRequest = parse(&body)?;
    if request.count > MAX_GENERATE {
        return Err(ServiceError::BadRequest(format!("count {} exceeds {MAX_GENERATE}", request.count)));
    }
    request.fixture.validate().map_err(|e| ServiceError::BadRequest(e.to_string()))?;
    let snapshot = state.active().ok_or(ServiceError::NoModel)?;
    let worker = Arc::clone(&state);
    let planograms = tokio::task::spawn_blocking(move || {
        snapshot
            .generate(&request.fixture, request.count, request.seed, &worker.catalog, &worker.constraints)
            .map(|p| (snapshot.version.clone(), p))
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(GenerateResponse {
        model_version: planograms.0,
        planograms: planograms.1,
    }))
}

async fn validate_planogram(
    State(state): State<Arc<ServiceState>>,
    body: Bytes,
) -> Result<Json<ValidationReport>, ServiceError> {
    let request: ValidateRequest = parse(&body)?;
    let violations = request.planogram.structural_violations(&state.catalog);
    if !violations.is_empty() {
        return Err(ServiceError::Structure(violations));
    }
    let constraints = request.constraints.as_ref().unwrap_or(&state.constraints);
    let report = validate(&request.planogram, constraints, &state.catalog).map_err(|e| ServiceError::Internal(e.to_string()))?;
    Ok(Json(report))
}

async fn rollback(State(state): State<Arc<ServiceState>>) -> Result<Json<serde_json::Value>, ServiceError> {
    let snapshot = state.rollback()?;
    Ok(Json(json!({ "active_version": snapshot.version })))
}

async fn health(State(state): State<Arc<ServiceState>>) -> Json<serde_json::Value> {
    let (active, previous) = state.versions();
    Json(json!({
        "status": if active.is_some() { "ok" } else { "no-model" },
        "active_version": active,
        "previous_version": previous,
        "catalog_size": state.catalog.len(),
    }))
}

async fn metrics(State(state): State<Arc<ServiceState>>) -> String {
    state.render_metrics()
}

async fn guard(State(state): State<Arc<ServiceState>>, headers: HeaderMap, request: Request, next: Next) -> Response {
    if let Some(key) = &state.config.api_key {
        if headers.get("x-api-key").and_then(|v| v.to_str().ok()) != Some(key.as_str()) {
            return ServiceError::Unauthorized.into_response();
        }
    }
    let endpoint = request
        .extensions()
        .get::<MatchedPath>()
        .map(|p| p.as_str().to_string())
        .unwrap_or_else(|| "unmatched".into());
    let start = Instant::now();
    let response = next.run(request).await;
    let ms = start.elapsed().as_secs_f64() * 1000.0;
    tracing::debug!(%endpoint, status = response.status().as_u16(), ms, "request");
    state.record(&endpoint, response.status().is_success(), ms);
    response
}

/// The `/v1` routes over `state`.
pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/planograms/generate", post(generate))
        .route("/v1/planograms/validate", post(validate_planogram))
        .route("/v1/admin/rollback", post(rollback))
        .route("/v1/health", get(health))
        .route("/v1/metrics", get(metrics))
        .route_layer(middleware::from_fn_with_state(Arc::clone(&state), guard))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(addr: SocketAddr, state: Arc<ServiceState>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, router(state)).await
}
