//! Numerical laboratory for α-harmonic maps between compact Riemannian
//! manifolds.

pub mod energy;
pub mod error;
pub mod fd;
pub mod fields;
pub mod geometry;
pub mod lab;
pub mod linalg;
pub mod optimize;
pub mod spectral;
pub mod stability;
pub mod tolerances;

pub use error::{Error, Result};
