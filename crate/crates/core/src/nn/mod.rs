//! Minimal reverse-mode autodiff over dense `f64` matrices, plus the layers
//! and optimiser the fusion model and the frame aggregator are built from.
//!
//! A [`Graph`] is built per forward pass; parameters live in a
//! [`ParamStore`] that outlives the graph. Every tensor is 2-D, rows are
//! tokens and columns are features.

mod adam;
mod graph;
mod layers;
mod params;

pub use adam::{Adam, AdamConfig, AdamState};
pub use graph::{Gradients, Graph, NodeId};
pub use layers::{EncoderBlock, FeedForward, LayerNorm, Linear, MultiHeadAttention};
pub use params::{Initializer, ParamId, ParamStore};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NnError {
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },
}
