//! Session store, analysis pipeline, HTTP API and command line for the
//! screening pipeline in `park_core`.

pub mod api;
pub mod cli;
pub mod config;
pub mod pipeline;
pub mod server;
pub mod store;
pub mod training;
