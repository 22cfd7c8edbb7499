//! Vacuum kinetic energy density of a massless scalar field between a pair
//! of delta-function barriers, and the corresponding quantum-inequality check.

pub mod energy;
pub mod error;
pub mod modes;
pub mod numerics;
pub mod oracle;
pub mod qi;

pub use error::{Error, Result};
pub use modes::{BoxSpec, ModeSolution, Parity, PotentialSpec, Region};
