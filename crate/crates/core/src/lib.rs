//! Finite-volume minimizers of a nonlocal double-well energy with a
//! fractional (Gagliardo) interaction and a lattice random field, plus the
//! experiments that probe their ordering, symmetry and fluctuation structure.

pub mod energy;
pub mod error;
pub mod experiments;
pub mod lattice;
pub mod minimize;

pub use error::{Error, Result};
