//! Session service: persistent sessions with revisioned DocSpecs, background
//! plan and execute jobs, and the HTTP API the editor talks to.

mod api;
mod model;
mod sessions;
mod store;

use std::future::Future;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::{router, ApiError, AppState};
pub use model::*;
pub use sessions::{ExecuteRequest, RevisionOutcome, ServiceError, SessionService};
pub use store::{is_session_id, write_atomic, Store, StoreError};

use crate::pipeline::{PipelineConfig, ProviderSource};

pub const DEFAULT_ADDR: &str = "127.0.0.1:8787";
pub const DEFAULT_WORKERS: usize = 2;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub addr: SocketAddr,
    pub data_dir: PathBuf,
    pub cors: bool,
    pub workers: usize,
    pub source: ProviderSource,
    pub pipeline: PipelineConfig,
}

/// Serves until `shutdown` resolves, then fails in-flight jobs as
/// restartable and waits for the workers.
pub async fn serve(config: ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> std::io::Result<()> {
    let ServiceConfig {
        addr,
        data_dir,
        cors,
        workers,
        source,
        pipeline,
    } = config;
    let svc = tokio::task::spawn_blocking(move || SessionService::open(&data_dir, source, pipeline, workers))
        .await
        .map_err(std::io::Error::other)?
        .map_err(std::io::Error::other)?;
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    let app = router(svc.clone(), cors);
    let result = axum::serve(listener, app).with_graceful_shutdown(shutdown).await;
    let svc2: Arc<SessionService> = svc.clone();
    tokio::task::spawn_blocking(move || {
        svc2.shutdown();
        svc2.join_workers();
    })
    .await
    .map_err(std::io::Error::other)?;
    result
}
