//! Mass of asymptotically hyperbolic and asymptotically flat metrics by
//! surface integrals: coordinate spheres, horospheres, truncated horosphere
//! faces and parabolic cylinders, cross-checked against each other and against
//! closed-form model values.

pub mod charts;
pub mod error;
pub mod jet;
pub mod metrics;

pub use error::{Error, Result};
pub mod geomkernel;
pub mod massform;
pub mod quadrature;
pub mod evaluators;
pub mod cli;
pub mod selftest;
