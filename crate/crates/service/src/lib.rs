//! HTTP API hosting what-if sessions over one compiled ruleset.
//!
//! Every session owns a copy of the data it was created with plus its own
//! overrides. Requests to one session are serialized; different sessions
//! run concurrently. Responses are compact JSON with a fixed member order,
//! so identical session state always yields identical bytes.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex as StdMutex};
use std::time::{Duration, Instant};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post, put};
use axum::Router;
use regula_core::dsl::{static_dependency_graph, RuleBinding};
use regula_core::engine::{FactStatus, SessionError};
use regula_core::jsonio::{self, ValueError};
use regula_core::{Database, Diagnostic, FactKey, FactRef, KeyName, Session, ToDiagnostic, TypedRuleset};
use serde::Deserialize;
use serde_json::{json, Map, Value};
use tokio::sync::Mutex;

/// Name of the session created from data supplied at start-up.
pub const DEFAULT_SESSION: &str = "default";

struct SessionSlot {
    session: Mutex<Session>,
    created: Instant,
    last_used: StdMutex<Instant>,
}

struct Shared {
    ruleset: Arc<TypedRuleset>,
    schema_doc: String,
    ttl: Duration,
    sessions: StdMutex<HashMap<String, Arc<SessionSlot>>>,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Shared>,
}

impl AppState {
    pub fn new(ruleset: Arc<TypedRuleset>) -> Self {
        Self::with_ttl(ruleset, Duration::from_secs(3600))
    }

    /// Sessions idle for longer than `ttl` are dropped.
    pub fn with_ttl(ruleset: Arc<TypedRuleset>, ttl: Duration) -> Self {
        let schema_doc = schema_document(&ruleset).to_string();
        AppState {
            inner: Arc::new(Shared {
                ruleset,
                schema_doc,
                ttl,
                sessions: StdMutex::new(HashMap::new()),
            }),
        }
    }

    /// Registers `db` as the session named [`DEFAULT_SESSION`].
    pub fn preload_default(&self, db: Database) {
        self.insert(DEFAULT_SESSION.to_string(), db);
    }

    pub fn session_count(&self) -> usize {
        self.sweep();
        self.inner.sessions.lock().unwrap().len()
    }

    fn insert(&self, id: String, db: Database) {
        let now = Instant::now();
        let slot = SessionSlot {
            session: Mutex::new(Session::new(self.inner.ruleset.clone(), db)),
            created: now,
            last_used: StdMutex::new(now),
        };
        self.inner.sessions.lock().unwrap().insert(id, Arc::new(slot));
    }

    fn sweep(&self) {
        let ttl = self.inner.ttl;
        self.inner
            .sessions
            .lock()
            .unwrap()
            .retain(|_, slot| slot.last_used.lock().unwrap().elapsed() <= ttl);
    }

    fn slot(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sweep();
        let slot = self
            .inner
            .sessions
            .lock()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("UnknownSession", format!("no session `{id}`")))?;
        *slot.last_used.lock().unwrap() = Instant::now();
        Ok(slot)
    }
}

/// The service's routes.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/schema", get(get_schema))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session).delete(delete_session))
        .route("/sessions/{id}/facts/{record_type}/{key}/{field}", get(get_fact))
        .route("/sessions/{id}/overrides", put(put_override))
        .route("/sessions/{id}/overrides/{fact}", delete(delete_override))
        .route("/sessions/{id}/missing", get(get_missing))
        .route("/sessions/{id}/saturate", post(saturate))
        .with_state(state)
}

/// Serves `state` on `listener` until the process stops.
pub async fn serve(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

struct ApiError {
    status: StatusCode,
    errors: Vec<Diagnostic>,
}

impl ApiError {
    fn new(status: StatusCode, errors: Vec<Diagnostic>) -> Self {
        ApiError { status, errors }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, vec![Diagnostic::new(code, message, None)])
    }

    fn not_found(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, vec![Diagnostic::new(code, message, None)])
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let status = match e {
            SessionError::TypeMismatch { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::NOT_FOUND,
        };
        ApiError::new(status, vec![e.to_diagnostic()])
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        json_response(self.status, &json!({ "errors": self.errors }))
    }
}

fn json_response(status: StatusCode, body: &Value) -> Response {
    (
        status,
        [(header::CONTENT_TYPE, "application/json")],
        body.to_string(),
    )
        .into_response()
}

fn ok(body: &Value) -> Response {
    json_response(StatusCode::OK, body)
}

fn schema_document(ruleset: &TypedRuleset) -> Value {
    let schema = &ruleset.schema;
    let records: Vec<Value> = schema
        .records()
        .map(|r| {
            let fields: Vec<Value> = r
                .fields
                .iter()
                .map(|f| {
                    let rule = match ruleset.binding(&r.name, &f.name) {
                        Some(RuleBinding::HasRule(_)) => Value::Bool(true),
                        Some(RuleBinding::NoRule) => Value::Bool(false),
                        None => Value::Null,
                    };
                    json!({
                        "name": f.name,
                        "sort": f.sort.to_string(),
                        "type": f.value_type.to_string(),
                        "rule": rule,
                    })
                })
                .collect();
            json!({ "name": r.name, "fields": fields })
        })
        .collect();
    let enums: Vec<Value> = schema
        .enums()
        .map(|e| json!({ "name": e.name, "members": e.members }))
        .collect();
    let rules: Vec<Value> = ruleset
        .ruled_fields()
        .map(|(r, f, body)| json!({ "target": format!("{r}.{f}"), "span": body.span.to_string() }))
        .collect();
    let graph = static_dependency_graph(ruleset);
    let edges: Vec<Value> = graph
        .edges
        .iter()
        .map(|(from, to)| json!({ "from": from.to_string(), "to": to.to_string() }))
        .collect();
    let cycles: Vec<Vec<String>> = graph
        .cycles
        .iter()
        .map(|c| c.iter().map(ToString::to_string).collect())
        .collect();
    json!({
        "records": records,
        "enums": enums,
        "rules": rules,
        "edges": edges,
        "cycles": cycles,
    })
}

async fn get_schema(State(state): State<AppState>) -> Response {
    (
        StatusCode::OK,
        [(header::CONTENT_TYPE, "application/json")],
        state.inner.schema_doc.clone(),
    )
        .into_response()
}

async fn create_session(State(state): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::bad_request("Malformed", e.to_string()))?;
    let db = jsonio::load_dataset(text, &state.inner.ruleset.schema).map_err(|errs| {
        ApiError::new(
            StatusCode::BAD_REQUEST,
            errs.iter().map(ToDiagnostic::to_diagnostic).collect(),
        )
    })?;
    let id = uuid::Uuid::new_v4().to_string();
    state.insert(id.clone(), db);
    Ok(json_response(StatusCode::CREATED, &json!({ "id": id })))
}

fn overrides_value(session: &Session) -> Value {
    let map: Map<String, Value> = session
        .overrides()
        .iter()
        .map(|(f, v)| (f.to_string(), jsonio::encode_value(v)))
        .collect();
    Value::Object(map)
}

/// Keys by record type, the active overrides, and the session age.
async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = state.slot(&id)?;
    let session = slot.session.lock().await;
    let mut records: BTreeMap<&str, Vec<String>> = state
        .inner
        .ruleset
        .schema
        .records()
        .map(|r| (r.name.as_str(), Vec::new()))
        .collect();
    for rec in session.database().records_by_name() {
        if let Some(keys) = records.get_mut(rec.record_type()) {
            keys.push(rec.key.name.to_string());
        }
    }
    Ok(ok(&json!({
        "id": id,
        "age_seconds": slot.created.elapsed().as_secs(),
        "records": records,
        "overrides": overrides_value(&session),
    })))
}

async fn delete_session(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    state.slot(&id)?;
    state.inner.sessions.lock().unwrap().remove(&id);
    Ok(StatusCode::NO_CONTENT.into_response())
}

fn status_name(s: FactStatus) -> &'static str {
    match s {
        FactStatus::Input => "input",
        FactStatus::Computed => "computed",
        FactStatus::Overridden => "overridden",
        FactStatus::Error => "error",
    }
}

async fn get_fact(
    State(state): State<AppState>,
    Path((id, record_type, key, field)): Path<(String, String, String, String)>,
) -> Result<Response, ApiError> {
    let name = KeyName::parse(&key).map_err(|e| ApiError::not_found("UnknownKey", e.to_string()))?;
    let fact = FactRef::new(FactKey::new(record_type, name), field);
    let slot = state.slot(&id)?;
    let mut session = slot.session.lock().await;
    let report = session.inspect_fact(&fact)?;
    let mut body = Map::new();
    body.insert("fact".into(), Value::String(fact.to_string()));
    body.insert("status".into(), Value::String(status_name(report.status).into()));
    match &report.outcome.result {
        Ok(v) => {
            body.insert("value".into(), jsonio::encode_value(v));
        }
        Err(errs) => {
            let diags: Vec<Diagnostic> = errs.iter().map(ToDiagnostic::to_diagnostic).collect();
            body.insert("errors".into(), json!(diags));
        }
    }
    body.insert(
        "deps".into(),
        json!({
            "fields": report.outcome.deps.field_strings(),
            "types": report.outcome.deps.type_strings(),
        }),
    );
    Ok(ok(&Value::Object(body)))
}

fn parse_fact(text: &str) -> Result<FactRef, ApiError> {
    text.parse()
        .map_err(|e: regula_core::value::FactRefParseError| ApiError::bad_request("InvalidFact", e.to_string()))
}

#[derive(Deserialize)]
struct OverrideBody {
    fact: String,
    value: Value,
}

async fn put_override(
    State(state): State<AppState>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let body: OverrideBody =
        serde_json::from_slice(&body).map_err(|e| ApiError::bad_request("Malformed", e.to_string()))?;
    let fact = parse_fact(&body.fact)?;
    let slot = state.slot(&id)?;
    let mut session = slot.session.lock().await;
    session.check_fact(&fact)?;
    let schema = session.schema();
    let ty = schema
        .fact_type(&fact.key.record_type, &fact.field)
        .map_err(|_| SessionError::UnknownField(fact.clone()))?;
    let db = session.database();
    let value = jsonio::decode_value(schema, &body.value, &ty, &|n| db.resolve_name(n).cloned()).map_err(
        |e| match e {
            ValueError::Mismatch { expected, found } => ApiError::from(SessionError::TypeMismatch {
                fact: fact.clone(),
                expected,
                found,
            }),
            ValueError::Dangling(name) => ApiError::bad_request("UnknownKey", format!("no record named `{name}`")),
        },
    )?;
    session.set_override(fact, value)?;
    Ok(ok(&json!({ "overrides": overrides_value(&session) })))
}

async fn delete_override(
    State(state): State<AppState>,
    Path((id, fact)): Path<(String, String)>,
) -> Result<Response, ApiError> {
    let fact = parse_fact(&fact)?;
    let slot = state.slot(&id)?;
    let mut session = slot.session.lock().await;
    let removed = session.clear_override(&fact)?;
    Ok(ok(&json!({ "removed": removed, "overrides": overrides_value(&session) })))
}

#[derive(Deserialize)]
struct MissingQuery {
    fact: String,
}

async fn get_missing(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<MissingQuery>,
) -> Result<Response, ApiError> {
    let fact = parse_fact(&q.fact)?;
    let slot = state.slot(&id)?;
    let session = slot.session.lock().await;
    session.check_fact(&fact)?;
    let report = session.get_missing_dependencies(&fact.key, &fact.field);
    Ok(ok(&json!({ "missing": report.missing, "types": report.types })))
}

async fn saturate(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let slot = state.slot(&id)?;
    let mut session = slot.session.lock().await;
    let report = session.saturate();
    let skipped: Vec<Value> = report
        .skipped
        .iter()
        .map(|(f, errs)| {
            let diags: Vec<Diagnostic> = errs.iter().map(ToDiagnostic::to_diagnostic).collect();
            json!({ "fact": f.to_string(), "errors": diags })
        })
        .collect();
    Ok(ok(&json!({
        "document": jsonio::database_to_value(&report.database, session.schema()),
        "skipped": skipped,
    })))
}
