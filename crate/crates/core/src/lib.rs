//! Magnetic-gradient dephasing in a three-grating Mach–Zehnder atom interferometer.
//!
//! The crate predicts the relative fringe visibility and phase of a lithium beam as a
//! function of the current in a small gradient coil, extracts visibilities from raw
//! fringe scans, and fits instrument parameters (coupling constant, parallel speed
//! ratio, isotope contamination) to measured visibility curves.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod atomic_levels;
pub mod config;
pub mod constants;
pub mod error;
pub mod field_geometry;
pub mod fringe_analysis;
pub mod halfint;
pub mod io;
pub mod least_squares;
pub mod param_fit;
pub mod quadrature;
pub mod special;
pub mod visibility_model;

pub use error::{Error, Result};
pub use halfint::HalfInt;
