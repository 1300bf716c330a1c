//! CODATA 2018 values in SI units.

/// Fundamental constants used throughout the model.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhysicalConstants {
    /// Bohr magneton (J/T).
    pub mu_b: f64,
    /// Reduced Planck constant (J s).
    pub hbar: f64,
    /// Vacuum permeability (T m/A).
    pub mu_0: f64,
    /// Planck constant (J s).
    pub h: f64,
}

pub const CODATA: PhysicalConstants = PhysicalConstants {
    mu_b: 9.274_010_078_3e-24,
    hbar: 1.054_571_817e-34,
    mu_0: 1.256_637_062_12e-6,
    h: 6.626_070_15e-34,
};

/// Unified atomic mass unit (kg).
pub const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

pub const MU_B: f64 = CODATA.mu_b;
pub const HBAR: f64 = CODATA.hbar;
pub const MU_0: f64 = CODATA.mu_0;
pub const PLANCK: f64 = CODATA.h;
