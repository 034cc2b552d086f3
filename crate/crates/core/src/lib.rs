//! Positive travelling wave fronts for reaction-diffusion systems with
//! distributed delay.
//!
//! The pipeline runs dominant characteristic root, heteroclinic of the
//! diffusion-free system, wave profile by fixed-point iteration, and direct
//! PDE simulation as a cross-check.

pub mod cli;
pub mod config;
pub mod error;
pub mod heteroclinic;
pub mod model;
pub mod numerics;
pub mod output;
pub mod pde;
pub mod profile;
pub mod spectrum;

pub use config::Tolerances;
pub use error::{Error, Result};
