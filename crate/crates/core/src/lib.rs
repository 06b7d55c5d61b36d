//! Numerical core for charting the two-transmon / shared-cavity design
//! landscape with optimal control.
//!
//! The crate is `no_std` (it needs `alloc`) and contains everything that is
//! pure computation: the rotating-frame model, dressed-state spectra,
//! control pulses, closed / effective / Lindblad propagation, two-qubit gate
//! geometry in the Weyl chamber, and the three-stage pulse optimization.
//! File formats, parallel orchestration and the command line live in the
//! `cqed` crate.
//!
//! Conventions: all frequencies and rates are angular (rad/s), times are in
//! seconds, and the basis of the full Hilbert space is ordered
//! `transmon 1 ⊗ transmon 2 ⊗ cavity`.
#![no_std]

extern crate alloc;

pub mod error;
pub mod exec;
pub mod gates;
pub mod linalg;
pub mod model;
pub mod optimize;
pub mod propagate;
pub mod pulse;
pub mod spectrum;
pub mod units;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
