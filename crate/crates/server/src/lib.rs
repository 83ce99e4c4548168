//! HTTP API, live provider and CLI plumbing around the `crowdsense` core.

pub mod api;
pub mod live;
pub mod providers;
pub mod sus_csv;

use std::net::SocketAddr;

use anyhow::Context;
use crowdsense::{Config, Workspace};

/// Restore the workspace from `config.data_dir` and serve until ctrl-c.
pub async fn serve(config: Config) -> anyhow::Result<()> {
    let dir = config.data_dir.clone();
    let workspace = tokio::task::spawn_blocking(move || Workspace::open(&dir))
        .await?
        .with_context(|| format!("cannot start from {}", config.data_dir.display()))?;
    let port = u16::try_from(config.http_port).context("http_port out of range")?;
    let state = api::AppState::new(workspace, config)?;
    let app = api::router(state);
    let addr = SocketAddr::from(([0, 0, 0, 0], port));
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .with_context(|| format!("cannot bind {addr}"))?;
    tracing::info!(%addr, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await?;
    Ok(())
}
