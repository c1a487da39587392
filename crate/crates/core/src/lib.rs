//! Trapped-ion synthetic gauge fields: compile lattice geometries into hopping
//! terms, schedule the multitone drive that realizes them, and check the full
//! spin-phonon dynamics against the ideal effective spin model.
//!
//! Units: ħ = 1 and every frequency is angular (rad/s) inside the library.
//! Files and command-line flags use Hz; see [`units`].

pub mod cli;
pub mod dynamics;
pub mod effective;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod magnus;
pub mod model;
pub mod scheduler;
pub mod units;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
