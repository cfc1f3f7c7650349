//! The Ramsey protocol that writes the work characteristic function onto
//! one or two ancilla qubits, and its readout.

pub mod protocol;
pub mod sweep;
pub mod tomography;

pub use protocol::{
    guard_rows, initial_hamiltonian, run_open_system, run_single_ancilla, run_single_ancilla_dense, run_two_ancilla,
    GSample, ProtocolRun, RunOptions, RunOutcome, Variant, GUARD_LEVELS, MAX_GUARD_POPULATION, PHASE_REL_TOL,
    THERMAL_FLOOR,
};
pub use sweep::{fmt17, summarize, sweep_u, uniform_grid, validate_grid, write_g_csv, ProtocolTemplate, SweepSummary};
pub use tomography::{emulate_shots, sigma2_y, sigma2_z, tomography_expectations};
