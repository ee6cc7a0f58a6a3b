//! Radial Fourier interpolation bases at square-root nodes, their perturbed
//! reconstruction operators, spherical-harmonic extensions, and the
//! Heisenberg-uniqueness pipeline for the hyperbola.

pub mod error;
pub mod modular;
pub mod basis;
pub mod hup;
pub mod io;
pub mod interp;
pub mod nonradial;
pub mod pchip;
pub mod quad;
pub mod spaces;
pub mod special;

pub use error::{Error, Result};
pub use modular::{HalfInt, HalfPlanePoint, QSeriesConfig, Sign};
