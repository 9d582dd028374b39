//! Command-line tool and HTTP service over the curation core.
//!
//! [`app::App`] holds the store, providers, wrappers and cart. The CLI in
//! [`cli`] and the router in [`server`] are thin layers over it, so both
//! produce the same JSON payloads.

pub mod app;
pub mod cart;
pub mod cli;
pub mod config;
pub mod server;

pub use app::{App, AppError};
pub use config::Settings;
