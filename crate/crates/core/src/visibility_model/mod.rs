//! Velocity- and sublevel-averaged fringe contrast and phase versus coil current.

mod population;
mod velocity;

pub use population::{PopulationPreset, SublevelPopulation};
pub use velocity::{velocity_pdf, BeamSpec, Transmission, VelocityDistribution, SUPPORT_WIDTHS};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::atomic_levels::{lande_g, IsotopeSpec, Sublevel, ZeemanMode};
use crate::error::{Error, Result};
use crate::field_geometry::{phase_coefficient, reduce_to_coupling, CouplingConstant, ExperimentGeometry};
use crate::quadrature::Tolerance;

/// Default tolerance for the velocity average.
pub const VELOCITY_TOLERANCE: Tolerance = Tolerance::new(1e-12, 1e-10);

/// Relative visibility and phase at one current, optionally with measurement errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VisibilityPoint {
    pub current_a: f64,
    pub v_r: f64,
    pub phase_rad: f64,
    pub sigma_v_r: Option<f64>,
    pub sigma_phase_rad: Option<f64>,
}

impl VisibilityPoint {
    pub fn new(current_a: f64, v_r: f64, phase_rad: f64) -> Self {
        VisibilityPoint {
            current_a,
            v_r,
            phase_rad,
            sigma_v_r: None,
            sigma_phase_rad: None,
        }
    }
}

/// Where the per-sublevel phases come from.
#[derive(Clone, Debug, PartialEq)]
pub enum PhaseSource {
    /// Scaling law with a fixed coupling constant (linear Zeeman only).
    Coupling(CouplingConstant),
    /// Full path integral through the coil field.
    Geometry(ExperimentGeometry),
}

/// One isotope of the beam with its sublevel populations and share of the signal.
#[derive(Clone, Debug, PartialEq)]
pub struct IsotopeComponent {
    pub isotope: IsotopeSpec,
    pub population: SublevelPopulation,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub components: Vec<IsotopeComponent>,
    pub beam: BeamSpec,
    pub order: u32,
    pub mode: ZeemanMode,
    pub source: PhaseSource,
    pub tolerance: Tolerance,
}

impl ModelConfig {
    /// Single isotope, linear Zeeman, first order.
    pub fn single(isotope: IsotopeSpec, population: SublevelPopulation, beam: BeamSpec, source: PhaseSource) -> Self {
        ModelConfig {
            components: vec![IsotopeComponent {
                isotope,
                population,
                weight: 1.0,
            }],
            beam,
            order: 1,
            mode: ZeemanMode::Linear,
            source,
            tolerance: VELOCITY_TOLERANCE,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::domain("model has no isotope components"));
        }
        if self.order == 0 {
            return Err(Error::domain("diffraction order must be at least 1"));
        }
        let total: f64 = self.components.iter().map(|c| c.weight).sum();
        for c in &self.components {
            c.isotope.validate()?;
            c.population.validate_for(&c.isotope)?;
            if !(c.weight >= 0.0 && c.weight.is_finite()) {
                return Err(Error::domain(format!("isotope weight {} is invalid", c.weight)));
            }
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::domain(format!("isotope weights sum to {total}, not 1")));
        }
        self.beam.validate()?;
        match &self.source {
            PhaseSource::Coupling(c) => {
                if !c.0.is_finite() {
                    return Err(Error::domain("coupling constant is not finite"));
                }
                if self.mode == ZeemanMode::BreitRabi {
                    return Err(Error::domain("Breit-Rabi mode needs the coil geometry, not a bare coupling constant"));
                }
            }
            PhaseSource::Geometry(g) => g.validate()?,
        }
        Ok(())
    }
}

/// Weighted phasors `w exp(i k / v^2)`, merged by `|k|` so each distinct `|k|` costs one `sincos`.
#[derive(Clone, Debug, Default)]
struct PhasorSet {
    /// `(|k|, w+ + w-, w+ - w-)`
    terms: Vec<(f64, f64, f64)>,
    /// Weight of phasors with `k = 0`.
    constant: f64,
}

impl PhasorSet {
    fn push(&mut self, weight: f64, k: f64) {
        if weight == 0.0 {
            return;
        }
        if k == 0.0 {
            self.constant += weight;
            return;
        }
        let (plus, minus) = if k > 0.0 { (weight, 0.0) } else { (0.0, weight) };
        match self.terms.iter_mut().find(|t| t.0 == k.abs()) {
            Some(t) => {
                t.1 += plus + minus;
                t.2 += plus - minus;
            }
            None => self.terms.push((k.abs(), plus + minus, plus - minus)),
        }
    }

    fn eval(&self, v: f64) -> Complex64 {
        let inv_v2 = 1.0 / (v * v);
        let mut z = Complex64::new(self.constant, 0.0);
        for &(k, sum, diff) in &self.terms {
            let (s, c) = (k * inv_v2).sin_cos();
            z.re += sum * c;
            z.im += diff * s;
        }
        z
    }
}

/// `Z = sum_s P_s integral P(v) exp(i dphi_s(v)) dv` for phases of the form `k_s / v^2`.
///
/// `phase_coefficient` returns `k_s` (rad m^2/s^2) for each sublevel. Returns `(V_r, phase)`.
pub fn complex_fringe_sum<F>(
    population: &SublevelPopulation,
    velocity: &VelocityDistribution,
    mut phase_coefficient: F,
    tol: Tolerance,
) -> Result<(f64, f64)>
where
    F: FnMut(&Sublevel) -> Result<f64>,
{
    let mut set = PhasorSet::default();
    for (s, w) in population.entries() {
        set.push(*w, phase_coefficient(s)?);
    }
    let z = fringe_phasor(&set, velocity, tol)?;
    Ok(polar(z))
}

fn fringe_phasor(set: &PhasorSet, velocity: &VelocityDistribution, tol: Tolerance) -> Result<Complex64> {
    if set.terms.is_empty() {
        return Ok(Complex64::new(set.constant, 0.0));
    }
    velocity.average(|v| set.eval(v), tol)
}

fn polar(z: Complex64) -> (f64, f64) {
    (z.norm().min(1.0), z.im.atan2(z.re))
}

/// How each sublevel's `k` is obtained for one model evaluation.
enum Coefficients {
    Scaling(f64),
    PathIntegral(ExperimentGeometry),
}

/// Visibility and phase at each current. Zero current gives exactly `(1, 0)`.
pub fn visibility_curve(model: &ModelConfig, currents: &[f64]) -> Result<Vec<VisibilityPoint>> {
    model.validate()?;
    if let Some(bad) = currents.iter().find(|i| !i.is_finite()) {
        return Err(Error::domain(format!("current {bad} is not finite")));
    }
    let velocity = VelocityDistribution::new(&model.beam)?;
    let coefficients = match (&model.source, model.mode) {
        (PhaseSource::Coupling(c), _) => Coefficients::Scaling(c.0),
        (PhaseSource::Geometry(g), ZeemanMode::Linear) if !g.has_ambient() => {
            let mut g = g.clone();
            g.interferometer.order = model.order;
            Coefficients::Scaling(reduce_to_coupling(&g)?.0)
        }
        (PhaseSource::Geometry(g), _) => {
            let mut g = g.clone();
            g.interferometer.order = model.order;
            Coefficients::PathIntegral(g)
        }
    };
    currents
        .par_iter()
        .map(|&current| {
            if current == 0.0 {
                return Ok(VisibilityPoint::new(current, 1.0, 0.0));
            }
            let mut set = PhasorSet::default();
            for comp in &model.components {
                for (s, w) in comp.population.entries() {
                    let weight = comp.weight * w;
                    if weight == 0.0 {
                        continue;
                    }
                    let k = match &coefficients {
                        Coefficients::Scaling(c) => {
                            c * f64::from(model.order) * lande_g(&comp.isotope, s.f)? * s.m_f.value() * current
                                / comp.isotope.mass_kg
                        }
                        Coefficients::PathIntegral(g) => phase_coefficient(g, &comp.isotope, s, current, model.mode)?,
                    };
                    set.push(weight, k);
                }
            }
            let (v_r, phase) = polar(fringe_phasor(&set, &velocity, model.tolerance)?);
            Ok(VisibilityPoint::new(current, v_r, phase))
        })
        .collect()
}

/// Adds independent Gaussian noise of standard deviation `sigma` to each `V_r` and records
/// `sigma` as its uncertainty. Identical seeds give identical curves.
pub fn add_visibility_noise(points: &[VisibilityPoint], sigma: f64, seed: u64) -> Result<Vec<VisibilityPoint>> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::domain(format!("noise level must be positive, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::domain(format!("noise level {sigma}: {e}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(points
        .iter()
        .map(|p| VisibilityPoint {
            v_r: p.v_r + normal.sample(&mut rng),
            sigma_v_r: Some(sigma),
            ..*p
        })
        .collect())
}

/// Gaussian-envelope approximation `exp(-(dphi_u / S)^2)` for one sublevel.
pub fn envelope_approximation(dphi_u: f64, s_par: f64) -> f64 {
    (-(dphi_u / s_par).powi(2)).exp()
}
