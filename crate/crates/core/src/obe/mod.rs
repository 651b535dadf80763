//! Optical Bloch equations for N three-level atoms `{g, up, down}`.
//!
//! The state is a dense `3^N x 3^N` density matrix evolved by
//! `d rho / dt = -2 pi i [H, rho] + L[rho]` with fixed-step RK4. The
//! Hamiltonian couples `g <-> up` optically, `up <-> down` by microwaves, and
//! exchanges `up/down` between atom pairs through the dipolar coupling. The
//! dissipator decays both Rydberg levels to `g`; the effective optical
//! damping only acts during optical pulses.

mod basis;
mod density;
mod engine;
mod hamiltonian;
mod readout;
mod sequence;

pub use basis::{Level, ProductBasis, MAX_OBE_ATOMS};
pub use density::ProductDensityMatrix;
pub use engine::{convergence_gap, run_sequence, LevelPopulations, ObeOptions};
pub use hamiltonian::{hamiltonian_at, lindblad_dissipator, SparseHamiltonian};
pub use readout::project_to_readout;
pub use sequence::{PulseSegment, PulseSequence, ReadoutConvention, SegmentKind, SequenceTiming};
