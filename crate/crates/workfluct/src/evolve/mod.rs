//! Time evolution under piecewise-smooth Hamiltonians.

pub mod compare;
pub mod config;
pub mod propagate;

pub use compare::{compare_generators, DeviationTrace, Ensemble};
pub use config::{Diagnostics, Method, PropagationConfig, MAX_PHASE_PER_STEP, MAX_UNITARITY_DRIFT};
pub use propagate::{
    evolve_rho, exp_apply, propagate_columns, propagator, propagator_cached, propagator_fn, SegmentCache,
};

#[cfg(test)]
mod tests;
