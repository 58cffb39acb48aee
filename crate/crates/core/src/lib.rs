//! Weak KAM machinery for measure-dependent Tonelli Hamiltonians on the unit
//! torus, and a damped fixed-point solver for the quasi-stationary mean field
//! game system it induces.
//!
//! The pipeline, bottom to top:
//!
//! * [`torus`] — periodic grids, grid measures/fields, exact circular W1,
//!   interpolation, particle density estimation;
//! * [`model`] — Hamiltonian families behind a common trait, selected by name
//!   through a registry, plus structural-constant estimation and validation;
//! * [`weakkam`] — the discrete Lax–Oleinik semigroup and everything built on
//!   it: critical value, Peierls barrier, Aubry set, calibrated curves and
//!   certificate checks;
//! * [`transport`] — particle pushforward of the initial measure under the
//!   optimal drift;
//! * [`solver`] — the damped Picard iteration coupling the two, with a
//!   solution verifier.
//!
//! Sign convention: the ergodic equation is `H(x, Du, m) + alpha = 0` with
//! `alpha = −inf_u sup_x H`; barriers accumulate action plus the critical
//! level `−alpha` per unit time.

// Points are fixed-size arrays with the grid dimension truncating the loops;
// indexing by axis is the clearest spelling of that.
#![allow(clippy::needless_range_loop)]

pub mod error;
pub mod model;
pub mod solver;
pub mod torus;
pub mod transport;
pub mod weakkam;

pub use error::{Error, Result};
