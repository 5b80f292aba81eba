//! Lossless convexification (LCvx) for discrete-time optimal control problems
//! whose inputs carry a nonconvex lower bound on their magnitude.
//!
//! The crate covers the whole chain:
//!
//! - [`linalg`]: matrix exponential, zero-order-hold discretization, rank and
//!   eigen-structure helpers.
//! - [`model`]: problem data, validation and nonconvex cost evaluation.
//! - [`transcribe`]: conversion of the relaxed problem into a standard-form
//!   cone program, plus dual recovery.
//! - [`conic`]: an interior-point cone solver (homogeneous self-dual
//!   embedding) and an independent operator-splitting backend.
//! - [`analysis`]: per-node validity, normal/long-horizon classification,
//!   dual-chain diagnostics and the control correction step.
//! - [`perturb`]: eigenvalue perturbation of the dynamics matrix.
//! - [`longhorizon`]: two-phase construction and bisection on the switching
//!   time.

pub mod analysis;
pub mod conic;
pub mod error;
pub mod linalg;
pub mod longhorizon;
pub mod model;
pub mod perturb;
pub mod transcribe;

pub use error::{LcvxError, Result};
