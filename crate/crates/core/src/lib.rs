//! Influence maximization from samples.
//!
//! Cascades generated under the Independent Cascade (IC) or Linear Threshold
//! (LT) model are used to estimate edge parameters from first-step statistics;
//! the surrogate graph is then handed to an influence-maximization algorithm.

pub mod dataset;
pub mod diffusion;
pub mod error;
pub mod experiment;
pub mod graph;
pub mod inference;
pub mod influence;
pub mod ims;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};
pub use graph::{AssumptionParams, Graph, Model, SeedDistribution};
