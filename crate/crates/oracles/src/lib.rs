//! Reference computations that deliberately avoid the code paths of `wsn-alloc`.
//!
//! Everything here is written against plain `Vec<Vec<f64>>` matrices and
//! brute-force numerics (Gauss-Jordan inversion, finite differences,
//! exhaustive grids, full enumeration). The routines are slow and only meant
//! for tests and the `selftest` subcommand.

pub mod dense;
pub mod enumerate;
pub mod numeric;
pub mod search;

pub use dense::Dense;
