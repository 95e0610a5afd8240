//! Single-photon scattering and delayed-feedback dynamics of a three-level
//! atom coupled at several points to two waveguides.
//!
//! - [`model`]: closed-form shifts, decay rates and scattering amplitudes.
//! - [`oracle`]: brute-force boundary-condition solver for the same amplitudes.
//! - [`dde`]: time-delayed master equation and steady-state demodulation.
//! - [`analysis`]: spectra, transparency windows, resonances, decoherence-free points.
//! - [`cli`]: configuration files and the batch front end.

pub mod analysis;
pub mod cli;
pub mod dde;
pub mod model;
pub mod oracle;
