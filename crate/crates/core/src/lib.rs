//! Random walks and exclusion on {0,…,N} coupled to a slow finite reservoir at site 0.
//!
//! The crate bundles exact event-driven simulation of both particle systems,
//! closed-form single-walk oracles, finite-difference and spectral solvers for
//! the limiting boundary-value problems, and a statistical harness tying the
//! three layers together.

pub mod error;
pub mod kmc;
pub mod measures;
pub mod model;
pub mod oracle;
pub mod pde;
pub mod profile;
pub mod quadrature;
pub mod stats;
pub mod verify;

pub use error::{Error, Result};
pub use model::{Configuration, ModelKind, ModelParams, Regime, Transition};
pub use profile::Profile;
