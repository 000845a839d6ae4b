//! Numerical toolkit for almost complex structures on coordinate boxes in R^{2n}.
//!
//! The crate is organised bottom-up:
//!
//! * [`poly`] and [`region`] hold the polynomial and lattice plumbing,
//! * [`jfield`] evaluates structures `J`, splits covectors into types and
//!   computes the Nijenhuis tensor,
//! * [`crsolve`] solves the Cauchy-Riemann system `J*df = i df` over a
//!   polynomial ansatz and estimates the Spencer type,
//! * [`charts`] certifies Spencer coordinate systems, projections,
//!   factorizations and transition maps,
//! * [`pseudogroup`] handles sampled local diffeomorphisms and the
//!   pseudogroup axioms,
//! * [`scenario`] parses scenario documents, runs them and emits reports.
//!
//! Grid sweeps run on rayon when the `parallel` feature is enabled (the
//! default). Results are always reduced in lattice order, so output does not
//! depend on the thread count.

// `!(x <= tol)` is used on purpose so that NaN fails every check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charts;
pub mod config;
pub mod crsolve;
pub mod error;
pub mod jfield;
pub mod linalg;
pub mod par;
pub mod poly;
pub mod pseudogroup;
pub mod region;
pub mod report;
pub mod scenario;

pub use config::{Limits, Tolerances};
pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use poly::{Monomial, Poly};
pub use region::{CoordBox, SampleGrid};
pub use report::{Report, Status};

/// Version string reported in every run.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
