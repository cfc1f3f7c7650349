//! Dense complex operator algebra on truncated composite Hilbert spaces.

pub mod fock;
pub mod layout;
pub mod linalg;
pub mod operator;
pub mod spectrum;
pub mod state;

pub use fock::{
    embed, fock_ops, hadamard, number, position, proj_minus, proj_plus, quadrature_sq, sigma_minus, sigma_plus,
    sigma_x, sigma_y, sigma_z,
};
pub use layout::SpaceLayout;
pub use operator::{trace_product, Operator};
pub use spectrum::{eig_hermitian, expm_skew, Spectrum};
pub use state::{gibbs_weights, log_partition, partial_trace, thermal_from_spectrum, thermal_state, DensityMatrix};

pub use num_complex::Complex64 as C64;
