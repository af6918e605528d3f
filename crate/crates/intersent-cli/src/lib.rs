//! Orchestration layer for the `intersent` binary: configuration files,
//! run artifacts (manifest, matrices, grid, report), response scoring, and
//! the four commands (`run`, `score`, `report`, `validate-config`).
//!
//! Everything the binary does is reachable through this library so that
//! integration tests can drive complete runs in-process.

pub mod artifacts;
pub mod config;
pub mod orchestrate;
pub mod report;
pub mod scoring;
