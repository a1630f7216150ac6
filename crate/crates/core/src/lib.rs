//! Compile Chebyshev expansions and continuous piecewise polynomials into ReLU networks.

pub mod calculus;
pub mod cheb;
pub mod emulator;
pub mod expr;
pub mod io;
mod error;
pub mod nn;
pub mod par;
pub mod product;
pub mod roundtrip;
pub mod sobolev;
pub mod spline;
pub mod studies;

pub use error::{Error, Result};
