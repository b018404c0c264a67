//! Complex continued fractions over arbitrary imaginary quadratic fields, elliptic
//! Dedekind sums, the Sczech homomorphism on `GL_2(O_K)`, and explicit witnesses for
//! the density of the graph of normalized elliptic Dedekind sums.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod brackets;
pub mod cfmartin;
pub mod cli;
pub mod dedekind;
pub mod density;
pub mod eisenstein;
pub mod error;
pub mod matrix;
pub mod qfield;

pub use error::{Error, Result};
pub use matrix::{KMat2, Mat2O};
pub use qfield::{CosetTable, Field, KElement, QuadInt};
