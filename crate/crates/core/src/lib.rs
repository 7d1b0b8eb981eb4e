// Published rational-approximation coefficients are kept digit for digit, symmetric
// matrices are filled by index, and `!(x > 0.0)` is how argument checks reject NaN.
#![allow(clippy::excessive_precision, clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod dynwalk;
pub mod envelope;
pub mod error;
pub mod harness;
pub mod latticewalk;
pub mod ougauss;
pub mod quadrature;
pub mod randvar;
pub mod replicate;
pub mod rng;
pub mod set_geometry;
pub mod stablerange;
pub mod stats;

pub use error::{Error, Result};
