//! Simulation and fitting of superconducting microwave resonators coupled to
//! a bath of two-level systems.

pub mod bessel;
pub mod distribution;
pub mod dynamics;
pub mod error;
pub mod fitting;
pub mod mattis_bardeen;
pub mod model;
pub mod numeric;
pub mod presets;
pub mod reflection;
pub mod tls;

pub use error::{Error, Result};
