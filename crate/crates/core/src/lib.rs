//! Certified evaluation of D-finite functions by binary splitting.
//!
//! A function is given by a linear ODE in θ-form with polynomial
//! coefficients over ℤ[i], its initial values at the ordinary point 0, and a
//! point ζ inside the disk of convergence. [`eval::evaluate`] returns a
//! complex dyadic within `2^-p` of `y(ζ)`, either by the classic exact
//! product tree or by the truncated variant whose working memory is linear
//! in `p`.

pub mod arith;
pub mod bench;
pub mod bounds;
pub mod catalog;
pub mod error;
pub mod eval;
pub mod matrix;
pub mod ledger;
pub mod ode;
pub mod product_tree;
pub mod trunc;

pub use error::{Error, Result};
