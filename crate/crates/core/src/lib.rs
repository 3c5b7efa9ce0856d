//! Numerical laboratory for microlocal resolvent and propagation estimates of
//! discrete Schrödinger operators H = H₀ + V on Z^d.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod escape;
pub mod fft;
pub mod fit;
pub mod geometry;
pub mod invariants;
pub mod lattice;
pub mod linmap;
pub mod propagate;
pub mod quantize;
pub mod resolvent;

pub use error::{Error, Result};
pub use linmap::{LinearMap, Map, C64};
