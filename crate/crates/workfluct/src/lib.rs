pub mod cli;
pub mod error;
pub mod evolve;
pub mod interferometry;
pub mod model;
pub mod qop;
pub mod workstats;

pub use error::{Error, Result};
