//! Guide chapters compiled as doctests.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/operators.md")]
pub mod operators {}
#[doc = include_str!("../../../book/src/model.md")]
pub mod model {}
#[doc = include_str!("../../../book/src/evolution.md")]
pub mod evolution {}
#[doc = include_str!("../../../book/src/interferometry.md")]
pub mod interferometry {}
#[doc = include_str!("../../../book/src/workstats.md")]
pub mod workstats {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
