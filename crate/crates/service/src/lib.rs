//! HTTP service behind the pronunciation game: diagnosis of uploaded
//! recordings, child registration, per-letter progress and reports.

pub mod api;
pub mod diagnose;
pub mod registry;
pub mod report;
pub mod store;

use std::future::Future;
use std::sync::Arc;

use arpa_core::classifiers::ModelKind;
use arpa_core::config::{PipelineConfig, ServiceSettings};

pub use api::{router, AppState};
pub use diagnose::{DiagnoseError, DiagnosisResult, Diagnoser};
pub use registry::ModelRegistry;
pub use store::{Clock, Store, SystemClock};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("model directory {0} holds no loadable models")]
    NoModels(String),
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Store(#[from] store::StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl AppState {
    pub fn from_settings(
        settings: &ServiceSettings,
        pipeline: &PipelineConfig,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, ServiceError> {
        let preferred = settings
            .preferred_model
            .as_deref()
            .map(str::parse::<ModelKind>)
            .transpose()
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let registry = ModelRegistry::load_dir(&settings.model_dir, preferred)
            .map_err(|e| ServiceError::Config(format!("{}: {e}", settings.model_dir.display())))?;
        if registry.is_empty() {
            return Err(ServiceError::NoModels(settings.model_dir.display().to_string()));
        }
        let diagnoser = Diagnoser::new(pipeline, registry, settings.max_audio_secs)
            .map_err(|e| ServiceError::Config(e.to_string()))?;
        let store = Store::open(&settings.data_dir, clock)?;
        let tokens = [&settings.parent_token, &settings.therapist_token]
            .into_iter()
            .flatten()
            .cloned()
            .collect();
        Ok(Self {
            diagnoser: Arc::new(diagnoser),
            store: Arc::new(store),
            tokens: Arc::new(tokens),
            max_upload_bytes: settings.max_upload_bytes,
        })
    }
}

/// Serves until `shutdown` resolves, then drains connections and compacts
/// every child's event log into a snapshot.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let store = state.store.clone();
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await?;
    tokio::task::spawn_blocking(move || store.compact())
        .await
        .map_err(|e| ServiceError::Config(e.to_string()))??;
    tracing::info!("state compacted, shutting down");
    Ok(())
}
