//! Feature-ordering engine for high-dimensional tabular data.
//!
//! The crate is `no_std` (it needs `alloc`) and covers three stages:
//!
//! - [`foe`]: decide whether reordering columns is likely to help, from the
//!   PCA intrinsic dimensionality of a standardized table.
//! - [`cluster`], [`graph`], [`rewiring`], [`global`]: compute a global
//!   feature permutation by clustering samples, building one feature graph per
//!   cluster, rewiring each graph by centrality and merging the local orders.
//! - [`fusion`]: a small order-aware network (positional embedding, importance
//!   gate, causal masked attention, pooled head) with analytic gradients and
//!   the dispersion / coherence losses.
//!
//! File formats, CSV ingestion and the command line live in the `featorder`
//! crate.

#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod cluster;
pub mod dataset;
pub mod error;
pub mod foe;
pub mod fusion;
pub mod global;
pub mod graph;
pub mod linalg;
pub mod permutation;
pub mod pipeline;
pub mod rewiring;
pub mod rng;

pub use dataset::{DataMatrix, Task};
pub use error::{Error, Result};
pub use permutation::Permutation;
