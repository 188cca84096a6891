//! Desk-scale toolkit for classical four-wave-mixing frequency-comb
//! experiments in highly non-linear fiber, and for the photon-coincidence
//! analysis that accompanies them.
//!
//! The pieces, bottom to top:
//!
//! - [`signal`] — sampling grids, complex field envelopes, unitary FFTs,
//!   power/energy bookkeeping, spectrum CSV dumps.
//! - [`dispersion`] — quadratic `D(λ)` model, least-squares fit, Taylor
//!   β₂–β₄, dispersive transfer phase, phase-mismatch helper.
//! - [`comb`] — input-spectrum construction: comb lines carrying dense
//!   sub-combs under Gaussian envelopes, a Dirac-delta CW pump, optional
//!   linear chirp.
//! - [`ssfm`] — symmetric split-step propagation of the fourth-order
//!   non-linear envelope equation, with conservation diagnostics and a
//!   step-size convergence probe.
//! - [`fwm`] / [`calibrate`] — signal/idler line predictions, the all-pairs
//!   comb correlation table, sideband measurement, and derivative-free
//!   calibration of input scales against a measured trace.
//! - [`osa`] — trace I/O, resolution-bandwidth emulation, trace comparison.
//! - [`coincidence`] / [`tagsim`] — tag-stream correlograms, peak trains,
//!   CAR with Poisson errors, and the synthetic pair source they are
//!   validated against.

pub mod calibrate;
pub mod comb;
pub mod coincidence;
pub mod dispersion;
pub mod error;
pub mod fwm;
pub mod osa;
mod peaks;
pub mod signal;
pub mod ssfm;
pub mod tagsim;

pub use error::{Error, Result};
pub use signal::SPEED_OF_LIGHT;
