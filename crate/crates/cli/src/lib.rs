//! Command-line front end: CSV ingestion, run manifests and the
//! `simulate`, `estimate`, `compare` and `bench` commands.

pub mod app;
pub mod error;
pub mod io;
pub mod manifest;

pub use app::run;
