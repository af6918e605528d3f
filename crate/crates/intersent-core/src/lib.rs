//! Core domain logic for inter-group sentiment experiments.
//!
//! The pipeline modelled here asks a language model templated questions about
//! how one social group feels about another, scores the free-text answers with
//! a lexicon-rule sentiment analyzer, averages the scores per group pair, and
//! correlates the resulting matrix against real opinion-poll data.
//!
//! This crate holds everything that is pure computation:
//!
//! * [`groups`] — attributes, group rosters, question templates, and the
//!   deterministic expansion into fully rendered prompts;
//! * [`sentiment`] — the VADER-compatible compound scorer behind a pluggable
//!   analyzer interface;
//! * [`stats`] — per-pair aggregation, Pearson correlation, and the two-sided
//!   non-correlation test;
//! * [`polls`] — loading and validating reference poll matrices.
//!
//! Networking and orchestration live in sibling crates.

pub mod groups;
pub mod polls;
pub mod sentiment;
pub mod stats;
