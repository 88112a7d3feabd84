//! Independent reference computations for the cvbell pipeline.
//!
//! Nothing in this crate depends on `cvbell-core`. Each routine reaches its
//! answer by a different road than the production code: closed forms and
//! truncated Fock sums for the two-mode squeezed vacuum, literal Wick pairing
//! enumeration for the photon-correlation algebra, and a perturbative
//! creation-operator expansion of the optical network for the small-squeezing
//! Bell limit.

pub mod fock;
pub mod tmsv;
pub mod wick;

pub use fock::{fock_bell_value, fock_correlations, fock_e_value, FockCircuit, FockError};
pub use tmsv::{tmsv_nn, tmsv_nn_fock_sum, TmsvParams};
pub use wick::{wick_fourth_moment, PairMoments};
