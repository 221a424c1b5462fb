//! Alignment of word senses across lexical resources.
//!
//! The crate loads dictionary-like and thesaurus-like resources into a common
//! sense model, proposes sense-to-sense matches with three independent
//! matchers and combines them into a single merge run.

pub mod bimatch;
pub mod config;
pub mod defmatch;
pub mod hiermatch;
pub mod ingest;
pub mod lexmodel;
pub mod pipeline;
pub mod store;

/// Version stamped on every file the crate writes.
pub const SCHEMA_VERSION: u32 = 1;
