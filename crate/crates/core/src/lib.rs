//! Exceptional points of two coupled damped oscillators and the Fano
//! line shapes that describe their spectra near coalescence.

pub mod ep;
mod error;
pub mod experiment;
pub mod fano;
pub mod fit;
pub mod io;
pub mod model;
pub mod spectral;

pub use error::{Error, Result};
