//! Local HTTP JSON API over PSA analyses.
//!
//! Sessions hold an analysis and its extensions in memory. Every response
//! that reflects session state carries the session revision (also as an
//! `ETag`); mutations accept `If-Match: <revision>` and answer 409 when it is
//! stale. Intervention indices are 1-based throughout.
//!
//! | Method | Path | |
//! |---|---|---|
//! | POST | `/sessions` | create from row arrays, CSV text, a manifest path or an archive |
//! | GET | `/sessions/{id}` | state digest |
//! | DELETE | `/sessions/{id}` | drop the session |
//! | PATCH | `/sessions/{id}` | `{ref?, comparisons?, kmax?}` |
//! | GET | `/sessions/{id}/summary?k=` | summary block |
//! | POST | `/sessions/{id}/extensions` | `{riskav?, shares?, multice?}` |
//! | GET | `/sessions/{id}/plots/{kind}?k=&comparison=&legend=&format=` | plot specification or SVG |
//! | POST | `/sessions/{id}/evppi` | `{params, method?, thin?, full_grid?}`, returns a job id |
//! | GET | `/sessions/{id}/archive` | archive document |
//! | GET | `/jobs/{id}` | job status and result |

pub mod api;
pub mod error;
pub mod state;

use axum::http::{header, Method};
use axum::routing::{get, post};
use axum::Router;
use tower_http::cors::{Any, CorsLayer};

pub use error::{ApiError, FieldError};
pub use state::{AppState, Job, JobStatus, Session};

pub fn router(state: AppState) -> Router {
    let cors = CorsLayer::new()
        .allow_origin(Any)
        .allow_methods([Method::GET, Method::POST, Method::PATCH, Method::DELETE])
        .allow_headers([header::CONTENT_TYPE, header::IF_MATCH])
        .expose_headers([header::ETAG]);
    Router::new()
        .route("/sessions", post(api::create_session))
        .route(
            "/sessions/{id}",
            get(api::get_session).patch(api::patch_session).delete(api::delete_session),
        )
        .route("/sessions/{id}/summary", get(api::get_summary))
        .route("/sessions/{id}/extensions", post(api::post_extensions))
        .route("/sessions/{id}/plots/{kind}", get(api::get_plot))
        .route("/sessions/{id}/evppi", post(api::post_evppi))
        .route("/sessions/{id}/archive", get(api::get_archive))
        .route("/jobs/{id}", get(api::get_job))
        .layer(cors)
        .with_state(state)
}

/// Serves the API on `addr` until interrupted.
pub async fn serve(addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::default()))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
