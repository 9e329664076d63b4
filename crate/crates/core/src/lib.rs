//! Misinformation prevention by hybrid sampling.
//!
//! Given a directed graph with independent-cascade edge probabilities and a
//! set of misinformation seeds, pick `k` positive seeds that maximize the
//! expected number of nodes saved from the misinformation.

pub mod cascade;
pub mod coverage;
pub mod error;
pub mod graph;
pub mod hmp;
pub mod oracle;
pub mod rng;
pub mod sampler;

pub use error::{Error, Result};
pub use graph::{Graph, NodeId, SeedSet};
