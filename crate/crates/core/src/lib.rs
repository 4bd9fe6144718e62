//! Fine-grained factual error detection for dialogue summaries.

pub mod adapters;
pub mod corruptor;
pub mod dataset;
pub mod cli;
pub mod enderanker;
pub mod ensemble;
pub mod experiment;
pub mod fsutil;
pub mod lingo;
pub mod metrics;
pub mod plugin;
pub mod registry;
pub mod text;
pub mod types;

pub use types::*;
