//! Long-time geodesic flow, sojourn relations and Schrödinger propagation on
//! asymptotically Euclidean spaces, with numerical wavefront-set detection.
//!
//! The crate is organised bottom-up:
//!
//! * [`geometry`]: metric and potential families, Christoffel symbols, the
//!   geodesic Hamiltonian.
//! * [`flow`]: Hamiltonian geodesic flow with variational equations,
//!   nontrapping certification, shooting for geodesic distance.
//! * [`sojourn`]: forward/backward sojourn relations by checkpointed
//!   extrapolation, and the contact-form pullback check.
//! * [`evolve`]: sampled fields, spectral propagation, split-step evolution
//!   with a potential, the quadratic gauge and the parametrix phase.
//! * [`microlocal`]: Gabor-based detection of WF, WF_sc and WF_qsc, and the
//!   propagation round-trip check.
//!
//! Batch operations accept an [`par::Exec`] selector. With the default
//! `parallel` feature they fan out over rayon; without it every batch runs
//! sequentially.

pub mod error;
pub mod evolve;
pub mod flow;
pub mod geometry;
pub mod integrator;
pub mod io;
pub mod jet;
pub mod microlocal;
pub mod par;
pub mod sojourn;

pub use error::{Error, Result};
