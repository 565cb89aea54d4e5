//! Functional regression with an excess number of basis functions.
//!
//! Longitudinal samples are turned into basis-expanded functions with the
//! minimum-norm interpolator, then scalar-on-function and function-on-function
//! regressions are fitted with pseudo-inverse estimators. The [`experiment`]
//! module drives the simulation sweeps that trace MSE against the number of
//! basis functions.

pub mod basis;
pub mod datagen;
pub mod error;
pub mod experiment;
pub mod functionalize;
pub mod linalg;
pub mod regression;
pub mod selection;

pub use error::{Error, Result};
