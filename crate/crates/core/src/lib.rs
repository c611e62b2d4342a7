//! Controlled master–slave synchronization of Lurie-form nonlinear systems
//! coupled through a one-bit-per-sample, rate-limited digital channel.
//!
//! The crate covers the full design-and-simulation chain:
//!
//! * [`lurie`] — Lurie-form models (linear part plus an output nonlinearity),
//!   exact transfer functions and the hyper-minimum-phase test;
//! * [`passify`] — search for and verification of passification certificates
//!   `(P, K, eta)` with `P B = C'`;
//! * [`codec`] — the binary quantizer with a time-based zooming range and
//!   bit-exact mirrored coder/decoder state machines;
//! * [`bounds`] — the design constants (`a0`, `b0`, `q`, `r`, range and
//!   sampling-period thresholds) and the comparison-sequence machinery behind
//!   the exponential error bound;
//! * [`sim`] — fixed-step hybrid simulation of the closed loop and the
//!   rate-sweep experiment harness.

pub mod bounds;
pub mod codec;
pub mod error;
pub mod linalg;
pub mod lurie;
pub mod neldermead;
pub mod passify;
pub mod poly;
pub mod sim;

pub use error::{Error, Result};

// Matrix types appear in the public API; re-export the crate so downstream
// users stay on the same version.
pub use nalgebra;
pub use num_complex;
