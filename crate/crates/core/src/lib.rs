#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod inequalities;
pub mod infotheory;
pub mod lattice;
pub mod quadrature;
pub mod scalar;
pub mod smoothing;

pub use error::{Error, Result};
