//! Exact work statistics, reconstruction from characteristic-function
//! samples, and fluctuation-theorem checks.

pub mod distribution;
pub mod fluct;
pub mod fourier;
pub mod oracle;

pub use distribution::{Shape, WorkDistribution};
pub use fluct::{
    crooks_check, crooks_check_with, crooks_points, free_energy_oscillator, free_energy_spectral, jarzynski_check,
    linear_fit, CrooksOptions, CrooksPoint, CrooksSampling, FTReport, CROOKS_FLOOR,
};
pub use fourier::{
    grid_step, local_maxima, match_peaks, pdf_from_char, pdf_from_values, PeakMatch, Reconstruction, WGrid, Window,
    PEAK_HALF_WIDTH, REPORTING_BAND,
};
pub use oracle::{
    char_direct, exclusive_oracle, merge_peaks, tmp_oracle, WorkOracle, GUARD_TOP, MAX_LEAKAGE, MERGE_TOL,
};
