//! HTTP JSON service over one loaded cohort.
//!
//! All payloads are canonical JSON (sorted keys, floats at 6 significant
//! digits) and are memoized per request key, so identical GETs return
//! identical bytes.

mod cache;
mod error;
pub mod json;
mod routes;
mod session;

pub use cache::SingleFlight;
pub use error::ApiError;
pub use routes::router;
pub use session::Session;

use std::sync::Arc;
use tokio::net::TcpListener;

/// Serves until the listener fails.
pub async fn serve(listener: TcpListener, session: Arc<Session>) -> std::io::Result<()> {
    axum::serve(listener, router(session)).await
}
