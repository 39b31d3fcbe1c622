//! HTTP facade over a read-only registry of trained mortality risk models.
//!
//! Endpoints (JSON over HTTP/1.1):
//!
//! | method | path              | purpose                                   |
//! |--------|-------------------|-------------------------------------------|
//! | GET    | `/api/v1/schema`  | feature descriptors and display ranges    |
//! | GET    | `/api/v1/models`  | registry listing with metrics             |
//! | POST   | `/api/v1/predict` | probability and thresholded label         |
//! | POST   | `/api/v1/explain` | force-plot arrows, path or neighbors      |
//! | POST   | `/api/v1/whatif`  | base plus up to 64 single-feature edits   |
//!
//! Errors carry `{error, field?, detail}`.

mod api;
mod error;
mod registry;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::http::HeaderValue;
use axum::Router;
use mortrisk::cohort::default_schema;
use tokio::sync::oneshot;
use tower_http::cors::{Any, CorsLayer};

pub use api::{
    schema_document, DisplayRange, ExplainResponse, FeatureDocument, ModelSummary, Perturbation, PredictResponse,
    SchemaDocument, WhatIfResponse, WhatIfResult, MAX_PERTURBATIONS,
};
pub use error::ServiceError;
pub use registry::{ModelRegistry, RegistryEntry};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: String,
    pub model_dir: Option<PathBuf>,
    /// Cap on background rows used for Shapley explanations.
    pub background_size: Option<usize>,
    /// Allowed CORS origin; `*` allows any.
    pub cors_origin: Option<String>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        ServiceConfig {
            bind: "127.0.0.1:8080".into(),
            model_dir: None,
            background_size: None,
            cors_origin: None,
        }
    }
}

pub fn load_registry(config: &ServiceConfig) -> Result<ModelRegistry, ServiceError> {
    let mut registry = match &config.model_dir {
        Some(dir) => ModelRegistry::load_dir(dir)?,
        None => ModelRegistry::new(),
    };
    if registry.is_empty() {
        tracing::warn!("model registry is empty; predict and explain will answer 404");
    }
    if let Some(n) = config.background_size {
        registry.truncate_background(n);
    }
    Ok(registry)
}

pub fn app(registry: ModelRegistry, cors_origin: Option<&str>) -> Result<Router, ServiceError> {
    let state = Arc::new(api::AppState {
        registry,
        fallback_schema: default_schema(),
    });
    let router = api::routes(state);
    Ok(match cors_origin {
        None => router,
        Some("*") => router.layer(CorsLayer::new().allow_origin(Any).allow_methods(Any).allow_headers(Any)),
        Some(origin) => {
            let origin = HeaderValue::from_str(origin)
                .map_err(|_| ServiceError::Registry(format!("invalid CORS origin `{origin}`")))?;
            router.layer(CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any))
        }
    })
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    registry: ModelRegistry,
    config: &ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let router = app(registry, config.cors_origin.as_deref())?;
    let listener = tokio::net::TcpListener::bind(&config.bind).await.map_err(|source| ServiceError::Bind {
        addr: config.bind.clone(),
        source,
    })?;
    tracing::info!(addr = %listener.local_addr().map(|a| a.to_string()).unwrap_or_default(), "listening");
    axum::serve(listener, router)
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))
}

/// A server running on its own thread and runtime; stopped on drop.
pub struct ServerHandle {
    pub addr: SocketAddr,
    stop: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    /// Binds `bind` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(registry: ModelRegistry, bind: &str, cors_origin: Option<&str>) -> Result<Self, ServiceError> {
        let router = app(registry, cors_origin)?;
        let std_listener = std::net::TcpListener::bind(bind).map_err(|source| ServiceError::Bind {
            addr: bind.to_string(),
            source,
        })?;
        std_listener
            .set_nonblocking(true)
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let addr = std_listener.local_addr().map_err(|e| ServiceError::Internal(e.to_string()))?;
        let (tx, rx) = oneshot::channel::<()>();
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(std_listener).expect("listener registers with runtime");
                let _ = axum::serve(listener, router)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(ServerHandle {
            addr,
            stop: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn url(&self, path: &str) -> String {
        format!("http://{}{path}", self.addr)
    }

    pub fn stop(mut self) {
        self.shutdown();
    }

    fn shutdown(&mut self) {
        if let Some(tx) = self.stop.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.shutdown();
    }
}
