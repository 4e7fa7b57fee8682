//! Haar sampling on SO(n), U(n), Sp(n), the contraction maps `Υ^m`,
//! Gamma-product integrals of matrix entries, and Monte Carlo machinery
//! to check the integral identities numerically.

pub mod cli;
pub mod closedform;
pub mod error;
pub mod haar;
pub mod matlin;
pub mod montecarlo;
pub mod quadrature;
pub mod rng;
pub mod scalar;
pub mod suite;
pub mod upsilon;
pub mod virtual_group;

pub use closedform::{ClosedFormValue, ExponentSpec, FormulaId};
pub use error::{Error, Result};
pub use haar::{gaussian_kmatrix, haar_unitary, HaarSample};
pub use matlin::{GroupElement, KMatrix};
pub use montecarlo::{ComparisonReport, McEstimate};
pub use rng::RngStream;
pub use scalar::{AlgebraTag, Group, Scalar};
pub use upsilon::{ChainScalars, CubePoint};

/// Identifier embedded in every report.
pub const BUILD_ID: &str = concat!(env!("CARGO_PKG_NAME"), "-", env!("CARGO_PKG_VERSION"));
