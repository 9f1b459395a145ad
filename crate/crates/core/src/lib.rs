//! Lineage-capturing in-memory query engine.

pub mod bench;
pub mod error;
pub mod expr;
pub mod fd;
pub mod lineage;
pub mod lineage_query;
pub mod operators;
pub mod planner;
pub mod relstore;
pub mod tpch;
pub mod workload;
pub mod xfilter;

pub use error::{Error, Result};
