//! Exact reduced dynamics of a Gaussian wave packet in a harmonic trap that is
//! linearly coupled to a finite set of environmental oscillators.
//!
//! Pipeline: [`model`] parameters → [`charpoly`] hybrid frequencies →
//! [`zsol`] fundamental solution `Z(tau)` → [`noise`] fluctuation integrals →
//! [`gaussian`] moment evolution and decoherence measure. [`oracle`] solves the
//! same problem by brute force on the full system and never touches `Z`.
//! [`ohmic`] holds the continuum limit, and [`trajectory`] assembles time
//! series for each engine.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charpoly;
pub mod error;
pub mod gaussian;
pub mod model;
pub mod noise;
pub mod ohmic;
pub mod oracle;
pub mod quadrature;
mod scaled;
pub mod trajectory;
pub mod zsol;

pub use charpoly::{ModalDecomposition, RootOptions};
pub use error::{Error, Result};
pub use gaussian::GaussianState;
pub use model::{EnvironmentSpec, Regime, RegimeClass, SystemParams};
pub use trajectory::{Engine, Trajectory};
