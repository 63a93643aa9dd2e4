//! Numerical laboratory for periodic homogenization of elliptic systems with
//! Neumann boundary conditions.

pub mod cell;
pub mod coefficients;
pub mod error;
pub mod kernel;
pub mod mesh;
pub mod neumann;
pub mod solver;
pub mod verify;

pub use error::{Error, Result};
