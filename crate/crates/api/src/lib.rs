//! HTTP/JSON API for Citadel.
//!
//! [`router`] builds the axum application from the route table; [`serve`]
//! runs it with a bounded graceful shutdown.

mod chat;
pub mod error;
mod extract;
mod handlers;
pub mod routes;

use std::future::{Future, IntoFuture};
use std::io;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::DefaultBodyLimit;
use axum::middleware::from_fn;
use axum::Router;
use citadel_core::{Citadel, CoreError};
use tokio::net::TcpListener;
use tokio::sync::{watch, Semaphore};

pub use error::{ApiError, REQUEST_ID_HEADER};
pub use routes::{check_routes, route_table, Route};

/// Longest time in-flight requests get after a shutdown signal.
pub const SHUTDOWN_GRACE: Duration = Duration::from_secs(10);

/// Concurrent chat long polls held open at once.
pub const MAX_LONG_POLLS: usize = 1024;

/// Multipart framing allowance on top of the configured upload size.
const BODY_SLACK: usize = 1 << 20;

#[derive(Clone)]
pub struct AppState {
    pub citadel: Arc<Citadel>,
    pub longpoll: Duration,
    polls: Arc<Semaphore>,
    closing: Arc<watch::Sender<bool>>,
}

impl AppState {
    pub fn new(citadel: Arc<Citadel>, longpoll: Duration) -> Self {
        AppState {
            citadel,
            longpoll,
            polls: Arc::new(Semaphore::new(MAX_LONG_POLLS)),
            closing: Arc::new(watch::channel(false).0),
        }
    }

    /// Wakes held long polls so they answer before shutdown.
    pub fn begin_shutdown(&self) {
        self.closing.send_replace(true);
    }
}

async fn unknown_route() -> error::Failure {
    error::Failure(CoreError::not_found("route"))
}

/// Builds the application. Fails if the route table and permission matrix
/// disagree.
pub fn router(state: AppState) -> Result<Router, String> {
    let limit = usize::try_from(state.citadel.settings().max_upload_bytes)
        .unwrap_or(usize::MAX)
        .saturating_add(BODY_SLACK);
    let mut app = Router::new();
    for (path, mr) in routes::method_routers(&state)? {
        app = app.route(path, mr);
    }
    Ok(app
        .fallback(unknown_route)
        .layer(DefaultBodyLimit::max(limit))
        .layer(from_fn(error::request_id))
        .with_state(state))
}

/// Serves until `shutdown` resolves, then lets in-flight requests finish for
/// at most [`SHUTDOWN_GRACE`].
pub async fn serve(listener: TcpListener, state: AppState, shutdown: impl Future<Output = ()> + Send) -> io::Result<()> {
    let app = router(state.clone()).map_err(io::Error::other)?;
    let (stop_tx, mut stop_rx) = watch::channel(false);
    let server = axum::serve(listener, app)
        .with_graceful_shutdown(async move {
            let _ = stop_rx.wait_for(|s| *s).await;
        })
        .into_future();
    tokio::pin!(server);
    tokio::select! {
        r = &mut server => return r,
        _ = shutdown => {}
    }
    tracing::info!("shutting down");
    stop_tx.send_replace(true);
    state.begin_shutdown();
    match tokio::time::timeout(SHUTDOWN_GRACE, server).await {
        Ok(r) => r,
        Err(_) => {
            tracing::warn!("in-flight requests did not finish within the grace period");
            Ok(())
        }
    }
}
