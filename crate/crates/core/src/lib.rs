//! Two-electron Trojan (Langmuir) wave packets of a helium-like atom in
//! combined circularly polarized and magnetic fields.
//!
//! The crate finds rotating-frame equilibria, classifies their linear
//! stability, maps stability over the field parameters, integrates classical
//! trajectories and runs diffusion Monte Carlo for the corresponding quantum
//! states.

pub mod cli;
pub mod dmc;
pub mod dynamics;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod stability;
pub mod units;

pub use error::{Error, Result};
pub use model::{Configuration, PhaseState};
pub use units::{Branch, Dims, FieldParams};
