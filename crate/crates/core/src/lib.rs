//! Photon-blockade modelling for driven-dissipative Kerr cavity networks.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod compare;
pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod linear;
pub mod models;
pub mod ode;
pub mod parallel;
pub mod perturbative;
pub mod series;
pub mod sparse;
pub mod sweep;
pub mod wfmc;

pub use error::{Error, Result};
