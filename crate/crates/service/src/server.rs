use std::sync::Arc;
use std::time::Duration;

use anyhow::Context;

use crate::api::{router, AppState, RouterOptions};
use crate::config::ServiceConfig;
use crate::pipeline::Analyzer;
use crate::store::SessionStore;

/// Loads models and resources, binds, and serves until Ctrl-C.
/// `on_bound` sees the actual address (useful with port 0).
pub async fn serve(cfg: ServiceConfig, on_bound: impl FnOnce(std::net::SocketAddr)) -> anyhow::Result<()> {
    cfg.validate()?;
    let analyzer = Analyzer::load(&cfg.model_bundle, &cfg.resource_directory)?;
    let store = SessionStore::new(&cfg.store_root);
    store.ensure_root().with_context(|| format!("store root {}", cfg.store_root.display()))?;
    let state = Arc::new(AppState { store, analyzer, max_upload_bytes: cfg.max_upload_bytes });
    let opts = RouterOptions {
        request_timeout: Duration::from_secs(cfg.request_timeout_s),
        cors_origins: cfg.cors_origins.clone(),
    };
    let listener = tokio::net::TcpListener::bind(cfg.bind).await.with_context(|| format!("bind {}", cfg.bind))?;
    let addr = listener.local_addr()?;
    tracing::info!(%addr, "listening");
    on_bound(addr);
    axum::serve(listener, router(state, &opts))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
