//! Layer-peeling reconstruction of piecewise constant layered conductivities
//! from partial-boundary Neumann-to-Dirichlet data in 2-D EIT.

// `!(x > 0.0)` is used throughout to reject NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod condense;
pub mod config;
pub mod driver;
pub mod error;
pub mod forward;
pub mod geometry;
pub mod io;
pub mod ndmap;
pub mod oracle;
pub mod order;
pub mod pipeline;
pub mod phantom;
pub mod shape;
pub mod sparse;
pub mod value;

pub use error::{Error, Result};
