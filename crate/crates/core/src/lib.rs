//! Multiscale kinetic/fluid Boltzmann solvers with uncertainty quantification.
//!
//! The crate is organised bottom-up: [`phase_space`] holds grids, fields and
//! moments; [`collision`] the spectral collision operator; [`kinetic`] and
//! [`fluid`] the two single-regime steppers; [`hybrid`] couples them with a
//! per-cell regime switch; [`uq`] provides sampling and estimators.

pub mod collision;
pub mod error;
pub mod fluid;
pub mod hybrid;
pub mod kinetic;
pub mod phase_space;
pub mod uq;

pub use error::{Error, Result};
