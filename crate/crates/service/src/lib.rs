//! HTTP session service tying the gaze pipeline together, with
//! file-backed persistence. One directory per session holds every
//! artifact; restart recovery is a directory scan.

pub mod config;
pub mod error;
pub mod routes;
pub mod state;
pub mod store;

pub use config::{AdapterConfig, EmbedderConfig, ServiceConfig};
pub use error::ApiError;
pub use routes::{build_router, run, ChatQuizDocument, QuizDocument};
pub use state::{ServiceError, ServiceState, SharedState};
pub use store::{SessionMeta, SessionState, SessionStore};
