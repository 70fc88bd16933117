//! Volumes of hyperplane sections of the unit-volume cube and polydisc,
//! together with the probabilistic lower-bound machinery around them.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bounds;
pub mod cli;
pub mod domain;
pub mod error;
pub mod montecarlo;
pub mod multidim;
pub mod quadrature;
pub mod specfun;

pub use domain::{field_params, normalize_direction, Direction, Field, FieldCase, SectionQuery};
pub use error::{Error, Result};
