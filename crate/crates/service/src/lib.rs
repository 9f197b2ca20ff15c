//! HTTP API and command-line front ends over `readiness-core`.

pub mod api;
pub mod cli;
pub mod store;

pub use api::{router, AppState};
pub use store::Store;
