//! Robust multi-view hashing.
//!
//! Learns binary hash functions from several feature views of the same
//! objects. Each view contributes an RBF kernelized similarity between a
//! small landmark set and the samples; a consensus low-rank similarity is
//! recovered from the (possibly corrupted) per-view matrices with an
//! inexact augmented Lagrangian solver, and kernel hash functions are fit
//! on it while per-view anchor graphs keep neighbouring samples on nearby
//! codes.
//!
//! Module map:
//!
//! - [`math`], [`kmeans`]: proximal operators, projections, clustering.
//! - [`dataset`], [`io`]: multi-view data, corruption protocols, MVH1 files.
//! - [`anchor_graph`]: sparse landmark graphs and their Laplacians.
//! - [`kernel`]: landmark-to-sample RBF similarity.
//! - [`alm`]: low-rank consensus recovery.
//! - [`trainer`]: the alternating hash-function optimizer and encoders.
//! - [`oos`]: out-of-sample encoding through a prototype base set.
//! - [`eval`]: Hamming ranking, hash lookup, MAP, precision-recall.
//! - [`model_file`]: versioned binary model container.

pub mod alm;
pub mod anchor_graph;
pub mod codes;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod io;
pub mod kernel;
pub mod kmeans;
pub mod math;
pub mod model_file;
pub mod oos;
mod par;
pub mod trainer;

pub use error::{Error, Result};
