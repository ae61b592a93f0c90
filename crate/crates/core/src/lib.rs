//! Power and quantization-rate allocation for distributed estimation of a
//! Gaussian vector over power- and bandwidth-limited wireless links.
//!
//! Sensors observe `x_k = a_kᵀθ + n_k`, quantize with a uniform `L_k`-bit
//! quantizer, and send the bits over BPSK links to a fusion center that
//! applies a linear estimator. The crate evaluates two closed-form MSE upper
//! bounds (`D_a`, `D_b`), minimizes them with the coupled (KKT power +
//! ellipsoid rate search) and decoupled (closed-form rates + one-dimensional
//! budget search) allocators, and checks the bounds against a Monte Carlo
//! end-to-end simulation.
//!
//! Module map:
//! - [`model`]: network parameters and derived second-order statistics.
//! - [`quantizer`]: level mapping, bit encoding, quantization-noise model.
//! - [`bounds`]: fusion matrix, bound components, rate gradients.
//! - [`poweralloc`]: KKT power allocation and its large-budget limit.
//! - [`ellipsoid`]: cutting-plane solver over the rate simplex.
//! - [`allocators`]: the four allocation algorithms, discretization, baseline.
//! - [`chansim`]: Monte Carlo simulator.
//! - [`experiments`]: config files, sweeps, CSV output.

pub mod allocators;
pub mod bounds;
pub mod chansim;
pub mod ellipsoid;
mod error;
pub mod experiments;
pub mod linalg;
pub mod model;
pub mod poweralloc;
pub mod quantizer;

pub use error::{Error, Result};
