//! Stateless HTTP front-end over an immutable trained model.
//!
//! `POST /v1/recommend` takes the whole composition context in each request,
//! so any number of handlers share one read-only snapshot.

pub mod api;
mod error;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use goalrec_core::{load_checkpoint, load_corpus, Checkpoint, ComposerContext, Corpus, CorpusFormat, ModelParams};
use log::info;
use serde_json::json;
use tower_http::cors::CorsLayer;

use api::*;
pub use error::{ApiError, ServeError};

#[derive(Debug)]
struct Inner {
    model: ModelParams,
    catalog: Vec<CatalogEntry>,
    index: HashMap<String, usize>,
    hash: String,
}

/// Shared, immutable server state.
#[derive(Debug, Clone)]
pub struct AppState(Arc<Inner>);

impl AppState {
    /// Pairs a checkpoint with the corpus that supplies names and
    /// descriptions; both must list the same services in the same order.
    pub fn new(checkpoint: Checkpoint, corpus: &Corpus) -> Result<Self, ServeError> {
        let model = checkpoint.params;
        let ids = model.semantic().service_ids();
        if ids.len() != corpus.num_services() {
            return Err(ServeError::Inconsistent(format!(
                "checkpoint has {} services, corpus has {}",
                ids.len(),
                corpus.num_services()
            )));
        }
        if let Some((pos, (a, b))) = ids.iter().zip(corpus.service_ids()).enumerate().find(|(_, (a, b))| a != b) {
            return Err(ServeError::Inconsistent(format!(
                "position {pos}: checkpoint has `{a}`, corpus has `{b}`"
            )));
        }
        let catalog = corpus
            .services
            .iter()
            .map(|s| CatalogEntry {
                service_id: s.id.clone(),
                name: s.name.clone(),
                description: s.description.clone(),
            })
            .collect();
        let index = ids.iter().enumerate().map(|(i, id)| (id.clone(), i)).collect();
        Ok(Self(Arc::new(Inner {
            model,
            catalog,
            index,
            hash: checkpoint.hash,
        })))
    }

    pub fn load(checkpoint: &Path, corpus: &Path) -> Result<Self, ServeError> {
        let ckpt = load_checkpoint(checkpoint)?;
        let corpus = load_corpus(corpus, CorpusFormat::JsonLines)?;
        Self::new(ckpt, &corpus)
    }

    pub fn model(&self) -> &ModelParams {
        &self.0.model
    }

    pub fn checkpoint_hash(&self) -> &str {
        &self.0.hash
    }

    pub fn catalog(&self) -> &[CatalogEntry] {
        &self.0.catalog
    }

    fn model_info(&self) -> ModelInfo {
        ModelInfo {
            d: self.0.model.dim(),
            service_count: self.0.model.num_services(),
            checkpoint_hash: self.0.hash.clone(),
        }
    }
}

/// Validates the request, infers the goal vector and ranks every
/// unselected service.
pub fn handle_recommend(state: &AppState, req: &RecommendRequest) -> Result<RecommendResponse, ApiError> {
    if req.k < 1 {
        return Err(ApiError::bad_request("invalid_k", "k must be at least 1", json!({ "k": req.k })));
    }
    if req.goal_text.trim().is_empty() && req.selected_service_ids.is_empty() {
        return Err(ApiError::bad_request(
            "empty_context",
            "provide a goal text or at least one selected service",
            serde_json::Value::Null,
        ));
    }
    let inner = &state.0;
    let mut selected = Vec::with_capacity(req.selected_service_ids.len());
    for id in &req.selected_service_ids {
        let &pos = inner
            .index
            .get(id)
            .ok_or_else(|| ApiError::bad_request("unknown_service", format!("unknown service id `{id}`"), json!({ "service_id": id })))?;
        if selected.contains(&pos) {
            return Err(ApiError::bad_request(
                "duplicate_selection",
                format!("service `{id}` is selected twice"),
                json!({ "service_id": id }),
            ));
        }
        selected.push(pos);
    }

    let model = &inner.model;
    let semantic = model.semantic();
    let goal = semantic.infer_goal_vector(&req.goal_text, semantic.config().infer_steps);
    let ctx = ComposerContext::new(goal, selected.clone());
    let candidates: Vec<usize> = (0..model.num_services()).collect();
    let k = usize::try_from(req.k).unwrap_or(usize::MAX);
    let recs = model.recommend(&ctx, k, &candidates).map_err(|e| ApiError::internal(e.to_string()))?;
    let attention = if selected.is_empty() {
        Vec::new()
    } else {
        model
            .attention_weights(&ctx)
            .map_err(|e| ApiError::internal(e.to_string()))?
            .into_iter()
            .map(|(pos, weight)| AttentionWeight {
                service_id: inner.catalog[pos].service_id.clone(),
                weight,
            })
            .collect()
    };
    let items = recs
        .into_iter()
        .map(|r| RecommendedItem {
            service_id: inner.catalog[r.position].service_id.clone(),
            name: inner.catalog[r.position].name.clone(),
            probability: r.probability,
            rank: r.rank,
        })
        .collect();
    Ok(RecommendResponse {
        items,
        attention,
        model_info: state.model_info(),
    })
}

async fn recommend(State(state): State<AppState>, body: Bytes) -> Result<Json<RecommendResponse>, ApiError> {
    let req: RecommendRequest = serde_json::from_slice(&body).map_err(|e| {
        ApiError::bad_request("malformed_request", "request body is not a valid RecommendRequest", json!(e.to_string()))
    })?;
    handle_recommend(&state, &req).map(Json)
}

async fn services(State(state): State<AppState>) -> Json<Vec<CatalogEntry>> {
    Json(state.catalog().to_vec())
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        checkpoint_hash: state.checkpoint_hash().to_string(),
    })
}

async fn not_found() -> ApiError {
    ApiError {
        status: axum::http::StatusCode::NOT_FOUND,
        code: "not_found",
        message: "no such endpoint".into(),
        detail: serde_json::Value::Null,
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/v1/recommend", post(recommend))
        .route("/v1/services", get(services))
        .route("/v1/health", get(health))
        .fallback(not_found)
        .layer(CorsLayer::permissive())
        .with_state(state)
}

/// Binds `addr` and serves until the process is stopped.
pub async fn serve(state: AppState, addr: SocketAddr) -> Result<(), ServeError> {
    let listener = tokio::net::TcpListener::bind(addr).await.map_err(|source| ServeError::Bind {
        addr: addr.to_string(),
        source,
    })?;
    info!("serving {} services on http://{}", state.catalog().len(), listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}
