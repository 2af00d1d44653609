//! Finite-dimensional simulator of pre- and post-selected quantum dynamics.
//!
//! The crate is organized around five subsystems:
//!
//! - [`hilbert`]: dense states, operators, density matrices, tensor products
//!   and spectral decompositions over labeled register bases.
//! - [`tsvf`]: the two-boundary measurement calculus — measurement
//!   postponement, boundary-conditioned outcome probabilities, effective
//!   final-state updates, the dominant-vector approximation and the
//!   Born-rule reduction for a completely mixed final boundary.
//! - [`branching`]: macroscopic branch selection — witness registers,
//!   decision trees, pathway multiplicity, bidirectional boundary matching
//!   with agent insertions, and interference-visibility checks.
//! - [`boseeinstein`]: identical-boson pair correlations — symmetrized
//!   emission probabilities, seeded pair sampling, the mixed-event
//!   C(Q_inv) estimator and the absorber comparison.
//! - [`pilotwave`]: guiding-equation trajectory integration for two-source
//!   interference geometries and the coincidence-rate comparison between
//!   trajectory and amplitude predictions.
//!
//! Monte Carlo loops derive every random draw from a master seed through
//! named sub-streams ([`rng`]) and run through order-deterministic parallel
//! helpers ([`par`]), so outputs are bit-identical for any worker count.
//! The `parallel` feature (default) enables rayon; without it the same code
//! runs sequentially with identical results.

pub mod boseeinstein;
pub mod branching;
pub mod error;
pub mod hilbert;
pub mod par;
pub mod pilotwave;
pub mod rng;
pub mod tolerances;
pub mod tsvf;

pub use error::{Error, Result};
pub use tolerances::Tolerances;
