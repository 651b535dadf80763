//! Coherent excitation transfer in chains of dipolar-coupled Rydberg atoms.
//!
//! The crate is organised bottom-up:
//!
//! * [`units`] and [`model`]: unit conventions, chain geometry, physical
//!   parameters and the `C3/R^3` coupling law.
//! * [`xy`]: closed-system dynamics of a single spin excitation under the XY
//!   Hamiltonian, static or with moving atoms.
//! * [`obe`]: optical Bloch equations on the `{g, up, down}^N` product space,
//!   driven by pulse sequences.
//! * [`thermal`]: thermal sampling, free flight, seeded Monte-Carlo averaging
//!   and a release-recapture loss model.
//! * [`detection`]: atom-loss forward model and its calibration.
//! * [`analysis`]: sinusoid and power-law fits, beat spectra and envelopes.
//! * [`scenarios`]: end-to-end experiments built from the pieces above.
//! * [`table`]: delimited time-series tables.

pub mod analysis;
pub mod detection;
pub mod error;
pub mod model;
pub mod obe;
pub mod scenarios;
pub mod table;
pub mod thermal;
pub mod units;
pub mod xy;

pub use error::{Error, Result};
pub use model::{ChainGeometry, PerAtom, PhysicalParams, Trajectories};
