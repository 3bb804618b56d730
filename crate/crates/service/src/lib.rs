//! HTTP facade over detscope-core: dataset loading, metrics, correction
//! sessions, totem analysis and static images, persisted as plain files.

pub mod config;
pub mod error;
pub mod routes;
pub mod store;

use std::sync::Arc;

use axum::Router;

pub use config::Config;
pub use error::ApiError;
pub use store::{StartupError, Store};

/// Opens the store (replaying persisted sessions) and builds the router.
pub fn app(config: &Config) -> Result<Router, StartupError> {
    let store = Store::open(&config.data_dir, &config.image_dir)?;
    Ok(routes::router(Arc::new(store)))
}

pub async fn serve(config: Config) -> Result<(), Box<dyn std::error::Error>> {
    let router = app(&config)?;
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    tracing::info!(addr = %config.listen, data_dir = %config.data_dir.display(), "listening");
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
