//! Biot-Savart kernels for generalized SQG equations, contour dynamics of
//! patches on the plane and half-plane, and the corner-collision scenario.

pub mod contour;
pub mod error;
pub mod jet;
pub mod kernel;
pub mod multiplier;
pub mod quad;
pub mod scenario;
pub mod special;
pub mod spectral;
pub mod velocity;

pub use error::{Error, Result};
