//! Biased edge dropout for fair graph representation learning.
//!
//! The crate provides the FairDrop sampler ([`fairdrop`]), dyadic group
//! fairness metrics for link prediction ([`dyadic`]), representation-bias
//! scores ([`rb`]), a random-walk embedding trainer ([`embedding`]), a
//! two-layer graph-convolutional link predictor ([`gcn`]) and an experiment
//! harness ([`harness`]).

pub mod dyadic;
pub mod embedding;
pub mod error;
pub mod fairdrop;
pub mod gcn;
pub mod harness;
pub mod graph;
pub mod learners;
pub mod rb;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{Edge, Graph, NodeFeatures, SensitiveAttributes};
