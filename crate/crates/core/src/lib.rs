//! Beam propagation through synthetic turbulent refractive-index fields,
//! Wigner phase-space diagnostics, and solvers for the white-noise and
//! geometrical-optics limit models.

pub mod background;
pub mod config;
pub mod beam;
pub mod container;
pub mod error;
pub mod fft;
pub mod grid;
pub mod harness;
pub mod interp;
pub mod medium;
pub mod moments;
pub mod par;
pub mod quad;
pub mod rays;
pub mod rng;
pub mod special;
pub mod spectra;
pub mod wigner;

pub use error::{Error, Result};
