//! Neumann–Poincaré spectra, curvature-driven eigenfunction blow-up and
//! plasmonic transmission scattering on smooth planar domains.
//!
//! The pipeline is geometry → quadrature → layer-potential operators →
//! spectra, field maps, curvature sweeps and Helmholtz scattering.

pub mod error;
pub mod fieldeval;
pub mod geometry;
pub mod io;
pub mod layerpot;
pub mod linalg;
pub mod quadrature;
pub mod scatter;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
