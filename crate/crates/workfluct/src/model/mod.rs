//! Hamiltonians and drive schedules of the driven oscillator, the ideal
//! ancilla coupling and the one- and two-qubit circuit-QED devices.

pub mod drive;
pub mod generator;
pub mod hamiltonian;
pub mod params;
pub mod schedule;

pub use drive::{
    chi_from_splittings, drive_exclusive, drive_inclusive, forward_protocol, linear_protocol, qubit_splittings,
    reverse_protocol, softmode_splitting, DrivePair, Splittings, WorkKind,
};
pub use generator::{AncillaBlock, BlockHamiltonian, Coef, LocalCoef, Piece, TdHamiltonian};
pub use hamiltonian::{
    h_ancilla_ideal, h_free, h_open, h_rabi, h_softmode, h_system, h_two_diag, h_two_rabi, ideal_generator,
    qubit_oscillator_layout, rabi_generator, softmode_generator, system_generator, two_diag_generator,
    two_qubit_layout, two_rabi_generator, OpenSystem,
};
pub use params::{BathMode, ModelParams, SoftModeConvention};
pub use schedule::{Form, Schedule, Segment, SplitKind};
