//! Multilayer shallow-water solver for polydisperse reactive sedimentation.

pub mod constitutive;
pub mod error;
pub mod geometry;
pub mod horizontal_flux;
pub mod io;
pub mod kinetics;
pub mod postproc;
pub mod stepper;
pub mod vertical_flux;

pub use error::{Error, Result};
