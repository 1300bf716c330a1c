//! Ground-state (J = 1/2) hyperfine sublevels of alkali atoms in a static field.
//!
//! Energy sign convention: the Zeeman term is `-mu_B B (g_J J_z + g_I I_z)`, so the
//! linear regime reads `E = -g_F mu_B M_F B`. This flips the overall sign of every
//! Zeeman shift relative to the usual atomic-physics tables; only phase signs are
//! affected, never visibilities. Energies are measured from the hyperfine centroid.

use crate::constants::{ATOMIC_MASS_UNIT, MU_B, PLANCK};
use crate::error::{Error, Result};
use crate::halfint::HalfInt;

/// Electronic angular momentum of the ground state.
pub const J_GROUND: HalfInt = HalfInt::HALF;

/// Fields above this are outside the ground-manifold model.
pub const DEFAULT_FIELD_CEILING_T: f64 = 1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum ZeemanMode {
    #[default]
    Linear,
    BreitRabi,
}

impl std::str::FromStr for ZeemanMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "linear" => Ok(ZeemanMode::Linear),
            "breit-rabi" | "breitrabi" | "nonlinear" => Ok(ZeemanMode::BreitRabi),
            other => Err(Error::domain(format!(
                "unknown Zeeman mode `{other}` (expected linear or breit-rabi)"
            ))),
        }
    }
}

impl std::fmt::Display for ZeemanMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ZeemanMode::Linear => "linear",
            ZeemanMode::BreitRabi => "breit-rabi",
        })
    }
}

/// Atomic constants of one isotope.
#[derive(Clone, Debug, PartialEq)]
pub struct IsotopeSpec {
    pub name: String,
    /// Atomic mass (kg).
    pub mass_kg: f64,
    pub nuclear_spin: HalfInt,
    /// Ground-state hyperfine interval between F = I + 1/2 and F = I - 1/2 (J).
    pub hfs_splitting_j: f64,
    pub g_j: f64,
    /// Nuclear g-factor in the same sign convention as `g_j`; zero neglects the nuclear moment.
    pub g_i: f64,
    /// Natural abundance, fraction in [0, 1].
    pub abundance: f64,
}

impl IsotopeSpec {
    /// Lithium-6. The electronic g-factor is 2 so that the Landé factors come out as
    /// exactly +-2/3 when the nuclear moment is neglected.
    pub fn li6() -> Self {
        IsotopeSpec {
            name: "Li6".into(),
            mass_kg: 6.015_122_887_4 * ATOMIC_MASS_UNIT,
            nuclear_spin: HalfInt::from_int(1),
            hfs_splitting_j: 228.205_259_8e6 * PLANCK,
            g_j: 2.0,
            g_i: 0.0,
            abundance: 0.076,
        }
    }

    /// Lithium-7, Landé factors +-1/2 with the nuclear moment neglected.
    pub fn li7() -> Self {
        IsotopeSpec {
            name: "Li7".into(),
            mass_kg: 7.016_003_436_6 * ATOMIC_MASS_UNIT,
            nuclear_spin: HalfInt::from_twice(3),
            hfs_splitting_j: 803.504_086_6e6 * PLANCK,
            g_j: 2.0,
            g_i: 0.0,
            abundance: 0.924,
        }
    }

    /// Built-in presets by name (`Li6`, `Li7`, case-insensitive).
    pub fn preset(name: &str) -> Result<Self> {
        match name.trim().to_ascii_lowercase().as_str() {
            "li6" | "6li" => Ok(Self::li6()),
            "li7" | "7li" => Ok(Self::li7()),
            other => Err(Error::domain(format!("unknown isotope preset `{other}`"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mass_kg > 0.0 && self.mass_kg.is_finite()) {
            return Err(Error::domain(format!("{}: mass must be positive", self.name)));
        }
        if !(self.hfs_splitting_j > 0.0 && self.hfs_splitting_j.is_finite()) {
            return Err(Error::domain(format!(
                "{}: hyperfine splitting must be positive",
                self.name
            )));
        }
        if self.nuclear_spin.twice() < 1 {
            return Err(Error::domain(format!(
                "{}: nuclear spin must be at least 1/2",
                self.name
            )));
        }
        if !(0.0..=1.0).contains(&self.abundance) {
            return Err(Error::domain(format!("{}: abundance outside [0, 1]", self.name)));
        }
        if !self.g_j.is_finite() || !self.g_i.is_finite() {
            return Err(Error::domain(format!("{}: g-factors must be finite", self.name)));
        }
        Ok(())
    }

    pub fn upper_f(&self) -> HalfInt {
        self.nuclear_spin + J_GROUND
    }

    pub fn lower_f(&self) -> HalfInt {
        self.nuclear_spin - J_GROUND
    }

    pub fn has_level(&self, f: HalfInt) -> bool {
        f == self.upper_f() || f == self.lower_f()
    }

    /// All `2(2I+1)` ground sublevels, upper level first, `M_F` ascending.
    pub fn sublevels(&self) -> Vec<Sublevel> {
        [self.upper_f(), self.lower_f()]
            .into_iter()
            .flat_map(|f| f.projections().map(move |m_f| Sublevel { f, m_f }))
            .collect()
    }

    /// Sublevels of a single hyperfine level.
    pub fn level(&self, f: HalfInt) -> Result<Vec<Sublevel>> {
        self.check_level(f)?;
        Ok(f.projections().map(|m_f| Sublevel { f, m_f }).collect())
    }

    fn check_level(&self, f: HalfInt) -> Result<()> {
        if self.has_level(f) {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "{} has no ground hyperfine level F = {f}",
                self.name
            )))
        }
    }

    fn check_sublevel(&self, s: &Sublevel) -> Result<()> {
        self.check_level(s.f)?;
        if s.m_f.abs() > s.f || (s.f.twice() - s.m_f.twice()) % 2 != 0 {
            return Err(Error::domain(format!("invalid sublevel {s}")));
        }
        Ok(())
    }
}

/// A hyperfine sublevel `(F, M_F)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Sublevel {
    pub f: HalfInt,
    pub m_f: HalfInt,
}

impl Sublevel {
    pub fn new(f: HalfInt, m_f: HalfInt) -> Result<Self> {
        if f.twice() < 0 || m_f.abs() > f || (f.twice() - m_f.twice()) % 2 != 0 {
            return Err(Error::domain(format!("invalid sublevel F = {f}, M_F = {m_f}")));
        }
        Ok(Sublevel { f, m_f })
    }
}

impl std::fmt::Display for Sublevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(F={}, M_F={})", self.f, self.m_f)
    }
}

/// Landé factor `g_F` of a ground hyperfine level.
pub fn lande_g(iso: &IsotopeSpec, f: HalfInt) -> Result<f64> {
    iso.check_level(f)?;
    let ff = f.casimir();
    let ii = iso.nuclear_spin.casimir();
    let jj = J_GROUND.casimir();
    let electronic = iso.g_j * (ff - ii + jj) / (2.0 * ff);
    let nuclear = iso.g_i * (ff + ii - jj) / (2.0 * ff);
    Ok(electronic + nuclear)
}

/// `-g_F mu_B M_F B`.
pub fn zeeman_energy_linear(iso: &IsotopeSpec, s: &Sublevel, b_t: f64) -> Result<f64> {
    iso.check_sublevel(s)?;
    let g = lande_g(iso, s.f)?;
    Ok(-g * MU_B * s.m_f.value() * b_t)
}

/// Zero-field energy of a hyperfine level relative to the centroid.
pub fn hyperfine_offset(iso: &IsotopeSpec, f: HalfInt) -> Result<f64> {
    iso.check_level(f)?;
    let two_i_plus_1 = f64::from(iso.nuclear_spin.twice() + 1);
    let i = iso.nuclear_spin.value();
    Ok(if f == iso.upper_f() {
        iso.hfs_splitting_j * i / two_i_plus_1
    } else {
        -iso.hfs_splitting_j * (i + 1.0) / two_i_plus_1
    })
}

/// Breit–Rabi energy with the default validity ceiling.
pub fn zeeman_energy_breit_rabi(iso: &IsotopeSpec, s: &Sublevel, b_t: f64) -> Result<f64> {
    breit_rabi(iso, s, b_t, DEFAULT_FIELD_CEILING_T).map(|(e, _)| e)
}

/// Breit–Rabi energy and its field derivative `dE/dB`.
///
/// Stretched states (`|M_F| = I + 1/2`) follow the closed linear branch so that the
/// energy stays analytic through `x = 1`.
pub fn breit_rabi(
    iso: &IsotopeSpec,
    s: &Sublevel,
    b_t: f64,
    ceiling_t: f64,
) -> Result<(f64, f64)> {
    iso.check_sublevel(s)?;
    if !(b_t >= 0.0) {
        return Err(Error::domain(format!("field magnitude must be >= 0, got {b_t}")));
    }
    if b_t > ceiling_t {
        return Err(Error::domain(format!(
            "field {b_t} T exceeds the {ceiling_t} T validity ceiling of the ground-manifold model"
        )));
    }
    let hfs = iso.hfs_splitting_j;
    let two_i_plus_1 = f64::from(iso.nuclear_spin.twice() + 1);
    let m = s.m_f.value();
    let dx_db = (iso.g_j - iso.g_i) * MU_B / hfs;
    let x = dx_db * b_t;

    let base = -hfs / (2.0 * two_i_plus_1) - iso.g_i * MU_B * m * b_t;
    let base_slope = -iso.g_i * MU_B * m;

    if s.m_f.abs() == iso.upper_f() {
        let sign = m.signum();
        let e = base + 0.5 * hfs * (1.0 - sign * x);
        let de = base_slope - 0.5 * hfs * sign * dx_db;
        return Ok((e, de));
    }

    let branch = if s.f == iso.upper_f() { 1.0 } else { -1.0 };
    let c = 4.0 * m / two_i_plus_1;
    let root = (1.0 - c * x + x * x).sqrt();
    let e = base + branch * 0.5 * hfs * root;
    let de = base_slope + branch * 0.5 * hfs * (2.0 * x - c) / (2.0 * root) * dx_db;
    Ok((e, de))
}

/// `dE/dB` of a sublevel at field `b_t` in the chosen treatment.
pub fn zeeman_slope(iso: &IsotopeSpec, s: &Sublevel, b_t: f64, mode: ZeemanMode) -> Result<f64> {
    match mode {
        ZeemanMode::Linear => {
            iso.check_sublevel(s)?;
            Ok(-lande_g(iso, s.f)? * MU_B * s.m_f.value())
        }
        ZeemanMode::BreitRabi => breit_rabi(iso, s, b_t, DEFAULT_FIELD_CEILING_T).map(|(_, d)| d),
    }
}
