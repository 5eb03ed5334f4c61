//! HTTP+JSON service for live sessions and the experimenter dashboard.
//!
//! Subjects authenticate with the token returned when their session is
//! created; the experimenter uses the run-wide experimenter token. Each
//! session's event log is appended to `data_dir` as it grows and replayed on
//! startup.

pub mod api;
pub mod config;
pub mod content;
pub mod error;
pub mod state;
pub mod store;

use std::net::SocketAddr;
use std::sync::Arc;

use thiserror::Error;

pub use config::{ConfigError, RunSettings, ServerConfig};
pub use content::Content;
pub use error::ApiError;
pub use state::AppState;
pub use store::StoreError;

#[derive(Debug, Error)]
pub enum ServerError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("listening on {addr}: {source}")]
    Bind { addr: SocketAddr, source: std::io::Error },
    #[error("server: {0}")]
    Io(#[from] std::io::Error),
}

/// A configured service, ready to be served or driven in-process.
pub struct App {
    pub state: Arc<AppState>,
    experimenter_token: String,
    addr: SocketAddr,
}

impl App {
    pub fn new(cfg: &ServerConfig) -> Result<Self, ServerError> {
        let token = cfg.experimenter_token.clone().unwrap_or_else(state::new_token);
        let state = Arc::new(AppState::new(cfg, &token)?);
        Ok(App { state, experimenter_token: token, addr: SocketAddr::new(cfg.bind, cfg.port) })
    }

    pub fn experimenter_token(&self) -> &str {
        &self.experimenter_token
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn router(&self) -> axum::Router {
        api::router(self.state.clone())
    }

    /// Serves until Ctrl-C.
    pub async fn serve(self) -> Result<(), ServerError> {
        let listener = tokio::net::TcpListener::bind(self.addr)
            .await
            .map_err(|source| ServerError::Bind { addr: self.addr, source })?;
        tracing::info!(addr = %listener.local_addr()?, run = %self.state.label, "listening");
        axum::serve(listener, self.router())
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    }
}
