//! Local HTTP JSON service over one in-memory netlist.
//!
//! Reads compute on an immutable snapshot; PATCH requests are serialised
//! through a single writer and clear the analysis cache.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::rejection::QueryRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use classe_core::netlist::{save_json, validate, EditError, Netlist};
use classe_core::rf::{db, s_params, FrequencyGrid, RfError};
use classe_core::transient::{simulate_report, SimConfig, SimError};
use classe_core::tuning::{dbm_to_watts, drive_for, gain_db, pae, pin_grid, sweep_pin, SweepResult, TuneError};
use serde::Serialize;
use serde_json::{json, Value};

use crate::summary::{hash_hex, summarize};

/// Largest frequency grid served by the S-parameter endpoint.
pub const MAX_FREQUENCY_POINTS: usize = 20_001;

pub const HASH_HEADER: &str = "x-netlist-hash";

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    hash: u64,
    kind: &'static str,
    params: String,
}

pub struct Session {
    netlist: RwLock<Arc<Netlist>>,
    cache: Mutex<HashMap<CacheKey, Arc<Value>>>,
    writer: tokio::sync::Mutex<()>,
}

impl Session {
    pub fn new(netlist: Netlist) -> Self {
        Self {
            netlist: RwLock::new(Arc::new(netlist)),
            cache: Mutex::new(HashMap::new()),
            writer: tokio::sync::Mutex::new(()),
        }
    }

    pub fn snapshot(&self) -> Arc<Netlist> {
        self.netlist.read().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn cached_entries(&self) -> usize {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).len()
    }

    fn replace(&self, n: Netlist) {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        *self.netlist.write().unwrap_or_else(|e| e.into_inner()) = Arc::new(n);
        cache.clear();
    }

    fn lookup(&self, key: &CacheKey) -> Option<Arc<Value>> {
        self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(key).cloned()
    }

    fn store(&self, key: CacheKey, v: Arc<Value>) {
        let mut cache = self.cache.lock().unwrap_or_else(|e| e.into_inner());
        // a result computed on a netlist that has since been replaced is dropped
        if self.snapshot().content_hash() == key.hash {
            cache.insert(key, v);
        }
    }
}

/// `{code, message, field}` error body.
#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub field: Option<String>,
}

impl ApiError {
    fn new(status: StatusCode, code: &'static str, message: impl Into<String>, field: Option<&str>) -> Self {
        Self { status, code, message: message.into(), field: field.map(str::to_string) }
    }

    fn bad(code: &'static str, message: impl Into<String>, field: Option<&str>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message, field)
    }

    fn numerical(message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "numerical", message, None)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<RfError> for ApiError {
    fn from(e: RfError) -> Self {
        match e {
            RfError::Grid(_) | RfError::Range(_) => ApiError::bad("bad_grid", e.to_string(), None),
            RfError::PortCount { .. } | RfError::Unsupported(_) => ApiError::bad("unsupported", e.to_string(), None),
            e => ApiError::numerical(e.to_string()),
        }
    }
}

impl From<SimError> for ApiError {
    fn from(e: SimError) -> Self {
        match e {
            SimError::Config(_) => ApiError::bad("bad_config", e.to_string(), None),
            SimError::Unsupported(_) => ApiError::bad("unsupported", e.to_string(), None),
            SimError::Analysis(e) => e.into(),
            e => ApiError::numerical(e.to_string()),
        }
    }
}

impl From<TuneError> for ApiError {
    fn from(e: TuneError) -> Self {
        match e {
            TuneError::Invalid { field, .. } => ApiError::bad("invalid_argument", e.to_string(), Some(field)),
            TuneError::Analysis(e) => e.into(),
            TuneError::Simulation(e) => e.into(),
            e => ApiError::bad("invalid_argument", e.to_string(), None),
        }
    }
}

impl From<EditError> for ApiError {
    fn from(e: EditError) -> Self {
        let msg = e.to_string();
        match e {
            EditError::UnknownId(_) => ApiError::new(StatusCode::NOT_FOUND, "unknown_component", msg, Some("id")),
            EditError::OutOfBounds { .. } => ApiError::bad("out_of_bounds", msg, Some("value")),
            EditError::NotFinite { .. } => ApiError::bad("not_finite", msg, Some("value")),
            EditError::NoScalarValue { .. } | EditError::NotAFet { .. } => {
                ApiError::bad("not_editable", msg, Some("id"))
            }
        }
    }
}

type Params = Result<Query<HashMap<String, String>>, QueryRejection>;

fn params(q: Params) -> Result<HashMap<String, String>, ApiError> {
    q.map(|Query(m)| m).map_err(|e| ApiError::bad("bad_query", e.body_text(), None))
}

fn number(p: &HashMap<String, String>, name: &str) -> Result<f64, ApiError> {
    let raw = p.get(name).ok_or_else(|| ApiError::bad("missing_parameter", format!("`{name}` is required"), Some(name)))?;
    match raw.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(ApiError::bad("bad_parameter", format!("`{name}` must be a finite number, got `{raw}`"), Some(name))),
    }
}

fn count(p: &HashMap<String, String>, name: &str) -> Result<usize, ApiError> {
    let raw = p.get(name).ok_or_else(|| ApiError::bad("missing_parameter", format!("`{name}` is required"), Some(name)))?;
    raw.trim()
        .parse::<usize>()
        .map_err(|_| ApiError::bad("bad_parameter", format!("`{name}` must be a non-negative integer, got `{raw}`"), Some(name)))
}

pub fn router(session: Arc<Session>) -> Router {
    Router::new()
        .route("/api/netlist", get(get_netlist))
        .route("/api/netlist/components/{id}", axum::routing::patch(patch_component))
        .route("/api/analysis/sparams", get(sparams))
        .route("/api/analysis/transient", get(transient))
        .route("/api/analysis/pae-sweep", get(pae_sweep))
        .route("/api/design/summary", get(summary))
        .fallback(|| async { ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such endpoint", None) })
        .with_state(session)
}

fn with_hash(mut r: Response, hash: &str) -> Response {
    if let Ok(v) = HeaderValue::from_str(hash) {
        r.headers_mut().insert(HASH_HEADER, v);
    }
    r
}

async fn get_netlist(State(s): State<Arc<Session>>) -> Response {
    let n = s.snapshot();
    let r = ([(header::CONTENT_TYPE, "application/json")], save_json(&n)).into_response();
    with_hash(r, &hash_hex(&n))
}

async fn patch_component(State(s): State<Arc<Session>>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let body: Value = serde_json::from_slice(&body)
        .map_err(|e| ApiError::bad("bad_body", format!("body must be JSON: {e}"), None))?;
    let value = body
        .get("value")
        .and_then(Value::as_f64)
        .ok_or_else(|| ApiError::bad("bad_body", "body must be {\"value\": number}", Some("value")))?;
    let _writer = s.writer.lock().await;
    let current = s.snapshot();
    let edited = current.set_component_value(&id, value)?;
    let report = validate(&edited);
    if !report.is_ok() {
        return Err(ApiError::bad("invalid_netlist", report.to_string(), Some("value")));
    }
    let hash = hash_hex(&edited);
    let component = edited.component(&id).cloned();
    s.replace(edited);
    let out = json!({
        "id": id,
        "value": value,
        "netlist_hash": hash,
        "tunable": component.and_then(|c| c.tunable),
    });
    Ok(with_hash(Json(out).into_response(), &hash))
}

/// Serves `kind` for the current snapshot from the cache or by running
/// `compute` off the async workers.
async fn cached<F>(s: Arc<Session>, kind: &'static str, key_params: String, compute: F) -> Result<Response, ApiError>
where
    F: FnOnce(&Netlist) -> Result<Value, ApiError> + Send + 'static,
{
    let n = s.snapshot();
    let hash = n.content_hash();
    let key = CacheKey { hash, kind, params: key_params };
    let hex = hash_hex(&n);
    if let Some(v) = s.lookup(&key) {
        return Ok(with_hash(Json(v.as_ref()).into_response(), &hex));
    }
    let v = tokio::task::spawn_blocking(move || compute(&n))
        .await
        .map_err(|e| ApiError::numerical(format!("analysis task failed: {e}")))??;
    let v = Arc::new(v);
    s.store(key, v.clone());
    Ok(with_hash(Json(v.as_ref()).into_response(), &hex))
}

async fn sparams(State(s): State<Arc<Session>>, q: Params) -> Result<Response, ApiError> {
    let p = params(q)?;
    let (from, to, points) = (number(&p, "from")?, number(&p, "to")?, count(&p, "points")?);
    if points > MAX_FREQUENCY_POINTS {
        return Err(ApiError::bad("bad_parameter", format!("at most {MAX_FREQUENCY_POINTS} points"), Some("points")));
    }
    let grid = FrequencyGrid::new(from, to, points)?;
    cached(s, "sparams", format!("{from:e}|{to:e}|{points}"), move |n| {
        let m = s_params(n, &grid)?;
        let col = |f: fn(&classe_core::rf::SPoint) -> classe_core::Complex64| -> Vec<[f64; 2]> {
            m.points.iter().map(f).map(|z| [z.re, z.im]).collect()
        };
        Ok(json!({
            "netlist_hash": hash_hex(n),
            "z_ref": m.z_ref,
            "freq": m.frequencies(),
            "s11": col(|p| p.s11),
            "s12": col(|p| p.s12),
            "s21": col(|p| p.s21),
            "s22": col(|p| p.s22),
            "s11_db": m.points.iter().map(|p| db(p.s11)).collect::<Vec<_>>(),
            "s21_db": m.points.iter().map(|p| db(p.s21)).collect::<Vec<_>>(),
        }))
    })
    .await
}

async fn transient(State(s): State<Arc<Session>>, q: Params) -> Result<Response, ApiError> {
    let p = params(q)?;
    let pin_dbm = number(&p, "pin_dbm")?;
    cached(s, "transient", format!("{pin_dbm:e}"), move |n| {
        let config = SimConfig { drive: drive_for(pin_dbm), ..SimConfig::default() };
        let (w, r) = simulate_report(n, &config)?;
        let p_in = dbm_to_watts(pin_dbm);
        Ok(json!({
            "netlist_hash": hash_hex(n),
            "pin_dbm": pin_dbm,
            "p_in": p_in,
            "p_out": r.p_out,
            "p_dc": r.p_dc,
            "gain_db": gain_db(p_in, r.p_out).ok(),
            "pae": pae(p_in, r.p_out, r.p_dc).ok(),
            "drain_efficiency": r.drain_efficiency,
            "zvs_residual": r.zvs_residual,
            "peak_drain_voltage": r.peak_drain_voltage,
            "overlap_power": r.overlap_power,
            "harmonic_levels_dbc": r.harmonic_levels,
            "periods": w.periods,
            "waveform": {
                "t_s": w.time,
                "v_drain": w.v_drain,
                "i_drain": w.i_drain,
                "v_load": w.v_load,
                "i_choke": w.i_choke,
            },
        }))
    })
    .await
}

#[derive(Serialize)]
struct SweepBody<'a> {
    netlist_hash: String,
    #[serde(flatten)]
    sweep: &'a SweepResult,
}

async fn pae_sweep(State(s): State<Arc<Session>>, q: Params) -> Result<Response, ApiError> {
    let p = params(q)?;
    let (from, to, step) = (number(&p, "from")?, number(&p, "to")?, number(&p, "step")?);
    let pins = pin_grid(from, to, step)?;
    cached(s, "pae-sweep", format!("{from:e}|{to:e}|{step:e}"), move |n| {
        let sweep = sweep_pin(n, &pins, &SimConfig::default())?;
        serde_json::to_value(SweepBody { netlist_hash: hash_hex(n), sweep: &sweep })
            .map_err(|e| ApiError::numerical(e.to_string()))
    })
    .await
}

async fn summary(State(s): State<Arc<Session>>) -> Result<Response, ApiError> {
    cached(s, "summary", String::new(), |n| {
        serde_json::to_value(summarize(n)).map_err(|e| ApiError::numerical(e.to_string()))
    })
    .await
}
