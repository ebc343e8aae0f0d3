//! Global optimization of expensive black-box functions from noisy
//! point evaluations, by optimistic search over hierarchical partitions
//! of the domain.
//!
//! The search keeps a tree of nested cells. At every sweep it walks the
//! depths, picks each depth's most promising unexpanded cell by an
//! optimistic upper value (empirical mean plus a confidence width), and
//! either samples that cell's representative point again or, once the
//! cell has enough pulls, splits it. Three strategies share the engine:
//!
//! * [`optimizers::stosoo_run`]: noise-adaptive, needs no smoothness
//!   input; each cell is sampled a fixed number of times before it may
//!   split.
//! * [`optimizers::soo_run`]: the noiseless special case, comparing
//!   exact values.
//! * [`optimizers::stodoo_run`]: takes a semi-metric describing how the
//!   objective falls off around its peak and samples each cell until
//!   its mean is resolved to within the cell's own diameter.
//!
//! [`objectives`] provides the benchmark functions and noise channels,
//! [`analysis`] the scoring instruments (regret, confidence-event
//! replay, packing counts), [`harness`] reproducible multi-run sweeps
//! with CSV output, and [`plot`] a dependency-free SVG chart of the
//! results. The `hiopt` binary exposes all of it on the command line.

pub mod analysis;
pub mod error;
pub mod harness;
pub mod metric;
pub mod objectives;
pub mod optimizers;
pub mod partition;
pub mod plot;
pub mod tree;

pub use error::{Error, Result};
pub use metric::SemiMetric;
pub use objectives::{NoiseChannel, Objective};
pub use optimizers::{
    default_params, recommend, soo_run, stodoo_run, stosoo_run, DooParams, Recommendation,
    RunOutcome, RunTrace, StoSooParams,
};
pub use partition::{Bounds, Cell};
pub use tree::{b_value, NodeId, NodeStats, PartitionTree};
