//! HTTP service: a registry of immutable models, each with a store of named evidence scenarios.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::body::Bytes;
use axum::extract::{FromRequest, Multipart, Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use delayprop_core::inference::StateRef;
use delayprop_core::json::to_canonical;
use delayprop_core::network::TableDoc;
use delayprop_core::{Error, ModelDocument, Network};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::commands::{answer, QueryBody};
use crate::config_hash;

/// Most scenarios one compare request may name.
pub const MAX_COMPARE: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavedScenario {
    pub id: String,
    pub name: String,
    pub evidence: BTreeMap<String, Vec<StateRef>>,
}

pub struct SessionModel {
    pub id: String,
    pub network: Network,
    pub config_hash: String,
    /// Unix seconds.
    pub created: u64,
    scenarios: Mutex<ScenarioStore>,
}

#[derive(Default)]
struct ScenarioStore {
    next: u64,
    items: BTreeMap<u64, SavedScenario>,
}

impl SessionModel {
    /// Model ids are the leading hex digits of the hash of the canonical model document.
    pub fn new(network: Network, created: u64) -> Result<Self, Error> {
        let canonical = to_canonical(&network.to_document())?;
        let config_hash = config_hash(canonical.as_bytes());
        Ok(SessionModel {
            id: config_hash[..16].to_string(),
            network,
            config_hash,
            created,
            scenarios: Mutex::new(ScenarioStore::default()),
        })
    }
}

pub struct Registry {
    dir: Option<PathBuf>,
    models: RwLock<BTreeMap<String, Arc<SessionModel>>>,
}

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

impl Registry {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Registry { dir, models: RwLock::new(BTreeMap::new()) }
    }

    /// Loads every `*.json` model in `dir`, in file-name order. Unreadable files are skipped.
    pub fn load_dir(dir: &Path) -> std::io::Result<Self> {
        let registry = Registry::new(Some(dir.to_path_buf()));
        let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "json"))
            .collect();
        paths.sort();
        for path in paths {
            let loaded = fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|b| serde_json::from_slice::<ModelDocument>(&b).map_err(|e| e.to_string()))
                .and_then(|doc| Network::from_document(doc).map_err(|e| e.to_string()));
            match loaded {
                Ok(net) => {
                    let created = fs::metadata(&path)
                        .and_then(|m| m.modified())
                        .ok()
                        .and_then(|t| t.duration_since(UNIX_EPOCH).ok())
                        .map_or(0, |d| d.as_secs());
                    let (model, _) = registry.insert(net, created).map_err(std::io::Error::other)?;
                    info!("loaded {} as model {} (config hash {})", path.display(), model.id, model.config_hash);
                }
                Err(e) => warn!("skipping {}: {e}", path.display()),
            }
        }
        Ok(registry)
    }

    /// Registers `net`; returns the model and whether it was new.
    pub fn insert(&self, net: Network, created: u64) -> Result<(Arc<SessionModel>, bool), Error> {
        let model = SessionModel::new(net, created)?;
        let mut models = self.models.write().expect("registry lock");
        if let Some(existing) = models.get(&model.id) {
            return Ok((existing.clone(), false));
        }
        let model = Arc::new(model);
        models.insert(model.id.clone(), model.clone());
        Ok((model, true))
    }

    pub fn get(&self, id: &str) -> Option<Arc<SessionModel>> {
        self.models.read().expect("registry lock").get(id).cloned()
    }

    pub fn list(&self) -> Vec<Arc<SessionModel>> {
        self.models.read().expect("registry lock").values().cloned().collect()
    }
}

pub type Shared = Arc<Registry>;

pub fn router(registry: Shared) -> Router {
    Router::new()
        .route("/models", get(list_models).post(create_model))
        .route("/models/{id}/graph", get(graph))
        .route("/models/{id}/query", post(query))
        .route("/models/{id}/scenarios", get(list_scenarios).post(create_scenario))
        .route("/models/{id}/scenarios/compare", post(compare))
        .route("/models/{id}/scenarios/{sid}", get(get_scenario).delete(delete_scenario))
        .with_state(registry)
}

pub async fn serve(addr: &str, registry: Shared) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(registry)).await
}

/// Error response with a JSON `{"error": ...}` body.
#[derive(Debug)]
pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        canonical_response(self.0, &json!({ "error": self.1 }))
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InconsistentEvidence => StatusCode::CONFLICT,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        ApiError(status, e.to_string())
    }
}

fn canonical_response<S: Serialize>(status: StatusCode, body: &S) -> Response {
    match to_canonical(body) {
        Ok(text) => (status, [(header::CONTENT_TYPE, "application/json")], text).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

type ApiResult = Result<Response, ApiError>;

fn model(registry: &Registry, id: &str) -> Result<Arc<SessionModel>, ApiError> {
    registry.get(id).ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown model `{id}`")))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("invalid body: {e}")))
}

fn summary(m: &SessionModel) -> Value {
    json!({
        "id": m.id,
        "config_hash": m.config_hash,
        "created": m.created,
        "nodes": (0..m.network.len()).map(|i| m.network.name(i)).collect::<Vec<_>>(),
    })
}

async fn list_models(State(registry): State<Shared>) -> Response {
    let models: Vec<Value> = registry.list().iter().map(|m| summary(m)).collect();
    canonical_response(StatusCode::OK, &json!({ "models": models }))
}

/// Accepts a model document as JSON, or multipart with a `config` part (network config or
/// model document) and an optional `tables` part.
async fn create_model(State(registry): State<Shared>, request: Request) -> ApiResult {
    let is_multipart = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .is_some_and(|v| v.starts_with("multipart/form-data"));
    let doc: ModelDocument = if is_multipart {
        let mut multipart = Multipart::from_request(request, &())
            .await
            .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        let (mut config, mut tables) = (None, None);
        while let Some(field) = multipart
            .next_field()
            .await
            .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?
        {
            let name = field.name().unwrap_or_default().to_string();
            let bytes = field.bytes().await.map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
            match name.as_str() {
                "config" => config = Some(bytes),
                "tables" => tables = Some(bytes),
                other => return Err(ApiError(StatusCode::UNPROCESSABLE_ENTITY, format!("unexpected part `{other}`"))),
            }
        }
        let config = config.ok_or_else(|| ApiError(StatusCode::UNPROCESSABLE_ENTITY, "missing `config` part".into()))?;
        let mut doc: ModelDocument = parse_body(&config)?;
        if let Some(t) = tables {
            doc.tables = parse_body::<Vec<TableDoc<f64>>>(&t)?;
        }
        doc
    } else {
        let bytes = Bytes::from_request(request, &())
            .await
            .map_err(|e| ApiError(StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))?;
        parse_body(&bytes)?
    };
    let net = Network::from_document(doc)?;
    let (model, fresh) = registry.insert(net, now())?;
    if fresh {
        info!("registered model {} (config hash {})", model.id, model.config_hash);
        if let Some(dir) = &registry.dir {
            let path = dir.join(format!("{}.json", model.id));
            let text = to_canonical(&model.network.to_document())?;
            if let Err(e) = fs::write(&path, text) {
                warn!("could not store {}: {e}", path.display());
            }
        }
    }
    let status = if fresh { StatusCode::CREATED } else { StatusCode::OK };
    Ok(canonical_response(status, &summary(&model)))
}

async fn graph(State(registry): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let m = model(&registry, &id)?;
    let net = &m.network;
    let nodes: Vec<Value> = (0..net.len())
        .map(|i| {
            let node = net.node(i);
            let mut v = json!({
                "name": node.name,
                "parents": node.parents,
                "states": node.domain.labels(),
            });
            if let Some(s) = net.scheme(i) {
                v["kind"] = json!("binned");
                v["bins"] = serde_json::to_value(s).unwrap_or(Value::Null);
                v["midpoints"] = json!(s.midpoints());
            } else {
                v["kind"] = json!("categorical");
            }
            v
        })
        .collect();
    Ok(canonical_response(StatusCode::OK, &json!({ "id": m.id, "nodes": nodes })))
}

async fn query(State(registry): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let m = model(&registry, &id)?;
    let body: QueryBody = parse_body(&body)?;
    let result = answer(&m.network, &body)?;
    Ok(canonical_response(StatusCode::OK, &result))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewScenario {
    name: String,
    #[serde(default)]
    evidence: BTreeMap<String, Vec<StateRef>>,
}

fn scenario_key(sid: &str) -> Option<u64> {
    sid.strip_prefix('s')?.parse().ok()
}

async fn create_scenario(State(registry): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let m = model(&registry, &id)?;
    let new: NewScenario = parse_body(&body)?;
    delayprop_core::inference::EvidenceSet::from_refs(&m.network, &new.evidence)?;
    let mut store = m.scenarios.lock().expect("scenario lock");
    store.next += 1;
    let key = store.next;
    let saved = SavedScenario { id: format!("s{key}"), name: new.name, evidence: new.evidence };
    store.items.insert(key, saved.clone());
    Ok(canonical_response(StatusCode::CREATED, &saved))
}

async fn list_scenarios(State(registry): State<Shared>, UrlPath(id): UrlPath<String>) -> ApiResult {
    let m = model(&registry, &id)?;
    let store = m.scenarios.lock().expect("scenario lock");
    let items: Vec<&SavedScenario> = store.items.values().collect();
    Ok(canonical_response(StatusCode::OK, &json!({ "scenarios": items })))
}

fn find_scenario(m: &SessionModel, sid: &str) -> Result<SavedScenario, ApiError> {
    let store = m.scenarios.lock().expect("scenario lock");
    scenario_key(sid)
        .and_then(|k| store.items.get(&k).cloned())
        .ok_or_else(|| ApiError(StatusCode::NOT_FOUND, format!("unknown scenario `{sid}`")))
}

async fn get_scenario(State(registry): State<Shared>, UrlPath((id, sid)): UrlPath<(String, String)>) -> ApiResult {
    let m = model(&registry, &id)?;
    Ok(canonical_response(StatusCode::OK, &find_scenario(&m, &sid)?))
}

async fn delete_scenario(State(registry): State<Shared>, UrlPath((id, sid)): UrlPath<(String, String)>) -> ApiResult {
    let m = model(&registry, &id)?;
    let mut store = m.scenarios.lock().expect("scenario lock");
    match scenario_key(&sid).and_then(|k| store.items.remove(&k)) {
        Some(_) => Ok(StatusCode::NO_CONTENT.into_response()),
        None => Err(ApiError(StatusCode::NOT_FOUND, format!("unknown scenario `{sid}`"))),
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CompareBody {
    scenarios: Vec<String>,
    #[serde(default)]
    query: Vec<String>,
}

async fn compare(State(registry): State<Shared>, UrlPath(id): UrlPath<String>, body: Bytes) -> ApiResult {
    let m = model(&registry, &id)?;
    let body: CompareBody = parse_body(&body)?;
    if body.scenarios.is_empty() || body.scenarios.len() > MAX_COMPARE {
        return Err(ApiError(
            StatusCode::UNPROCESSABLE_ENTITY,
            format!("compare takes 1 to {MAX_COMPARE} scenarios"),
        ));
    }
    let saved = body.scenarios.iter().map(|sid| find_scenario(&m, sid)).collect::<Result<Vec<_>, _>>()?;
    let mut posteriors: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    let mut expected: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let mut logprob = Vec::new();
    for s in &saved {
        let result = answer(&m.network, &QueryBody { evidence: s.evidence.clone(), query: body.query.clone() })?;
        for (node, p) in result.posteriors {
            posteriors.entry(node).or_default().push(p);
        }
        for (node, e) in result.expected {
            expected.entry(node).or_default().push(e);
        }
        logprob.push(result.evidence_logprob);
    }
    Ok(canonical_response(
        StatusCode::OK,
        &json!({
            "scenarios": body.scenarios,
            "posteriors": posteriors,
            "expected": expected,
            "evidence_logprob": logprob,
        }),
    ))
}

/// Registry for `serve`: the model directory when given, otherwise empty.
pub fn registry_for(dir: Option<&Path>) -> std::io::Result<Shared> {
    Ok(Arc::new(match dir {
        Some(d) => Registry::load_dir(d)?,
        None => Registry::new(None),
    }))
}
