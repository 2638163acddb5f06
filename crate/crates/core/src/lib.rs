//! Exact valuation-space computations on resolution dual graphs of normal surface singularities,
//! and the dynamics of holomorphic germs acting on them.

pub mod arith;
pub mod cusp;
pub mod dynamics;
pub mod error;
pub mod io;
pub mod resolution;
pub mod transport;
pub mod valuation;

pub use error::{Error, Result};
