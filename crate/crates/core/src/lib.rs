//! Algebraic geometry of polynomial convolutional networks.
//!
//! A 1-D CNN with monomial activation `x ↦ x^r` computes a tuple of
//! homogeneous polynomials of degree `r^{L-1}`. This crate builds that
//! parametrization exactly and numerically, factors it through the
//! Segre–Veronese embedding, evaluates the closed-form dimension, degree and
//! generic Euclidean distance degree of its image, describes its fibers and
//! singular points, and searches the critical points of the square loss.

pub mod census;
pub mod cli;
pub mod conv;
pub mod error;
pub mod fibers;
pub mod invariants;
pub mod jacobian;
pub mod param;
pub mod poly;
pub mod regression;
pub mod verify;

pub use conv::{Architecture, Filter};
pub use error::{Error, Result};
pub use poly::{Coeff, HomoPoly, MonomialBasis};
