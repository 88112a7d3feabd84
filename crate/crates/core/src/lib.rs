//! Simulation and analysis of a continuous-variable CHSH Bell test.
//!
//! Squeezed Gaussian states are pushed through a linear-optical network in
//! covariance-matrix form, photon-number correlations are computed from
//! quadrature second moments, and the CHSH combination is evaluated either
//! analytically or from synthetic homodyne records.

pub mod circuit;
pub mod correlation;
pub mod error;
pub mod gaussian;
pub mod records;
pub mod sampler;
pub mod analysis;
pub mod fit;
pub mod simplex;

pub use error::{Error, Result};
