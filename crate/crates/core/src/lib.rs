#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod diff;
pub mod error;
pub mod families;
pub mod fredholm;
pub mod linalg;
pub mod linear;
pub mod nonlinear;
pub mod quadrature;
pub mod semilinear;
pub mod verdict;

pub use error::{Error, Result};
pub use linalg::{c, Matrix, Vector, C64};
