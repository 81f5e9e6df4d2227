//! Local HTTP/JSON service hosting live audit sessions.
//!
//! The server owns the draw order: each session announces the ballot to
//! retrieve, and a submission is accepted only for that ballot and only with
//! the current `sequence_no`. Every accepted submission is appended to the
//! session's JSON-lines log before it takes effect, and the logs are replayed
//! on startup.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/sessions` | create from a manifest or synthetic spec |
//! | GET | `/sessions` | list session ids |
//! | GET | `/sessions/{id}` | status |
//! | POST | `/sessions/{id}/ballots` | submit the announced ballot |
//! | GET | `/sessions/{id}/events?since=k` | events after `k`; SSE with `Accept: text/event-stream` |
//! | GET | `/sessions/{id}/export` | transcript |
//! | POST | `/sessions/import` | rebuild a session from a transcript |

mod api;
mod error;
pub mod record;
pub mod store;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

pub use api::router;
pub use error::ApiError;
pub use store::Store;

#[derive(Debug, Clone)]
pub struct Config {
    pub listen: SocketAddr,
    /// Where session logs live; `None` keeps sessions in memory only.
    pub data_dir: Option<PathBuf>,
}

/// Serves until interrupted.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let store = Store::open(config.data_dir).map_err(|e| std::io::Error::other(e.message))?;
    let listener = tokio::net::TcpListener::bind(config.listen).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(store)))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
