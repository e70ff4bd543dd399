//! First-passage percolation on the integer lattice.
//!
//! Edge passage times come from a counter-based [`WeightField`]: every
//! weight is a pure function of `(seed, replica, edge)`, so any experiment
//! can be replayed bit-exactly and in any order. On top of that the crate
//! provides exact region-restricted shortest paths (point-to-point, slab,
//! disc-to-disc), the shape-dependent geometry of hyperplanes, slabs and
//! cylinders, the upper-regular envelope construction, and the Monte-Carlo
//! estimators and property diagnostics that read replicated samples.
//!
//! The crate is `no_std` and needs only `alloc`.

// `!(a < b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod diagnostics;
pub mod envelope;
mod error;
pub mod estimators;
pub mod geodesic;
pub mod geometry;
pub mod lattice;
pub mod stats;

pub use error::{Error, Result};
pub use geodesic::{GeodesicEngine, GeodesicResult};
pub use geometry::{Frame, Region, ShapeModel};
pub use lattice::{ConstantWeights, Distribution, Edge, EdgeWeights, Site, WeightField, Window};
