//! Periodic solutions of periodically forced delay systems
//! `u'(t) = g(u(t), u(t - tau)) + p(t)` near an equilibrium.
//!
//! The crate combines
//!
//! * a Fourier resonance test for the linearisation and the resulting lower
//!   bound on the number of periodic solutions ([`linan`]),
//! * a spectral fixed-point solver with multi-start Newton and a local-index
//!   audit ([`specsolve`]),
//! * a method-of-steps integrator, period maps and Floquet analysis
//!   ([`timedomain`]),
//! * punctured-ball domains with sampled inward-pointing checks ([`domain`]).
//!
//! Data-parallel loops follow an [`Execution`] policy; building without the
//! default `parallel` feature makes every policy sequential.

pub mod domain;
pub mod error;
pub mod exec;
pub mod linalg;
pub mod linan;
pub mod sampling;
pub mod specsolve;
pub mod system;
pub mod timedomain;
pub mod trig;

/// Version of this library, recorded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use error::{Error, Result};
pub use exec::Execution;
pub use system::{DelaySystem, FnField, LinearField, VectorField};
pub use trig::TrigPoly;
