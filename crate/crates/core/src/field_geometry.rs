//! Gradient coil and interferometer geometry.
//!
//! Coordinates: the atoms travel along +z, the two interferometer arms separate
//! along x, and the midline between the arms is the z axis. The coil sits beside
//! the beams, its center displaced by `center_offset_x_m` along x.

use nalgebra::Vector3;

use crate::atomic_levels::{zeeman_slope, IsotopeSpec, Sublevel, ZeemanMode};
use crate::constants::{HBAR, MU_0, MU_B, PLANCK};
use crate::error::{Error, Result};
use crate::quadrature::{integrate_with_breaks, Tolerance};
use crate::special::{ellip_ke, loop_radial_kernel};

/// Closest allowed approach to the conductor (m).
pub const SINGULARITY_DISTANCE_M: f64 = 1e-6;
/// Finite-difference step for the transverse gradient (m).
pub const GRADIENT_STEP_M: f64 = 1e-6;
/// Relative tolerance of the path integral along z.
pub const PATH_INTEGRAL_RTOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct CoilSpec {
    pub radius_m: f64,
    pub turns: u32,
    /// Distance from the beam midline to the coil center, along x (m).
    pub center_offset_x_m: f64,
    /// Coil center position along z relative to the second grating (m, negative upstream).
    pub axial_position_m: f64,
    /// Unit vector along the coil axis.
    pub axis: [f64; 3],
}

impl Default for CoilSpec {
    /// 3 cm diameter coil, 0.7 cm from the beams, 4 cm before the second grating.
    /// Five turns give about 1.4 mT at the beams for 9 A.
    fn default() -> Self {
        CoilSpec {
            radius_m: 0.015,
            turns: 5,
            center_offset_x_m: 0.007,
            axial_position_m: -0.04,
            axis: [1.0, 0.0, 0.0],
        }
    }
}

impl CoilSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius_m > 0.0 && self.radius_m.is_finite()) {
            return Err(Error::domain("coil radius must be positive"));
        }
        if self.turns == 0 {
            return Err(Error::domain("coil needs at least one turn"));
        }
        if !self.center_offset_x_m.is_finite() || !self.axial_position_m.is_finite() {
            return Err(Error::domain("coil position must be finite"));
        }
        let n = Vector3::from(self.axis).norm();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::domain("coil axis must be a nonzero vector"));
        }
        Ok(())
    }
}

/// Symmetric three-grating Mach–Zehnder layout.
#[derive(Clone, Debug, PartialEq)]
pub struct InterferometerGeometry {
    /// Grating positions along the beam (m).
    pub gratings_z_m: [f64; 3],
    /// Standing-wave laser wavelength (m); the grating period is half of it.
    pub wavelength_m: f64,
    /// Bragg diffraction order.
    pub order: u32,
}

impl Default for InterferometerGeometry {
    fn default() -> Self {
        InterferometerGeometry::symmetric(0.605, 671.0e-9, 1)
    }
}

impl InterferometerGeometry {
    pub fn symmetric(spacing_m: f64, wavelength_m: f64, order: u32) -> Self {
        InterferometerGeometry {
            gratings_z_m: [0.0, spacing_m, 2.0 * spacing_m],
            wavelength_m,
            order,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [z1, z2, z3] = self.gratings_z_m;
        if !(z1 < z2 && z2 < z3) {
            return Err(Error::domain("gratings must satisfy z1 < z2 < z3"));
        }
        let (l1, l2) = (z2 - z1, z3 - z2);
        if (l1 - l2).abs() > 1e-9 * l1.max(l2) {
            return Err(Error::domain("grating spacings must be equal (symmetric Mach-Zehnder)"));
        }
        if !(self.wavelength_m > 0.0 && self.wavelength_m.is_finite()) {
            return Err(Error::domain("laser wavelength must be positive"));
        }
        if self.order == 0 {
            return Err(Error::domain("diffraction order must be positive"));
        }
        Ok(())
    }

    pub fn grating_period(&self) -> f64 {
        0.5 * self.wavelength_m
    }

    pub fn k_l(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.wavelength_m
    }

    pub fn spacing(&self) -> f64 {
        self.gratings_z_m[1] - self.gratings_z_m[0]
    }

    /// Full angle between the two arms: momentum transfer `2p hbar k_L = p h / a`.
    pub fn diffraction_angle(&self, mass_kg: f64, v: f64) -> f64 {
        f64::from(self.order) * PLANCK / (mass_kg * v * self.grating_period())
    }
}

/// Coil plus interferometer plus an optional uniform ambient field.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ExperimentGeometry {
    pub coil: CoilSpec,
    pub interferometer: InterferometerGeometry,
    /// Uniform background field (T); zero by default.
    pub ambient_field_t: [f64; 3],
}

impl ExperimentGeometry {
    pub fn validate(&self) -> Result<()> {
        self.coil.validate()?;
        self.interferometer.validate()?;
        if self.ambient_field_t.iter().any(|b| !b.is_finite()) {
            return Err(Error::domain("ambient field must be finite"));
        }
        Ok(())
    }

    pub fn coil_center(&self) -> Vector3<f64> {
        Vector3::new(
            self.coil.center_offset_x_m,
            0.0,
            self.interferometer.gratings_z_m[1] + self.coil.axial_position_m,
        )
    }

    pub fn current_loop(&self) -> CurrentLoop {
        CurrentLoop {
            center: self.coil_center(),
            axis: Vector3::from(self.coil.axis).normalize(),
            radius_m: self.coil.radius_m,
            turns: self.coil.turns,
        }
    }

    pub fn has_ambient(&self) -> bool {
        self.ambient_field_t.iter().any(|&b| b != 0.0)
    }

    /// Total field at `point` for coil current `current_a`.
    pub fn field_at(&self, current_a: f64, point: Vector3<f64>) -> Result<Vector3<f64>> {
        Ok(loop_field(&self.current_loop(), current_a, point)? + Vector3::from(self.ambient_field_t))
    }

    fn check_z(&self, z: f64) -> Result<()> {
        let [z1, _, z3] = self.interferometer.gratings_z_m;
        if !(z1..=z3).contains(&z) {
            return Err(Error::domain(format!("z = {z} m outside the interferometer [{z1}, {z3}]")));
        }
        Ok(())
    }

    /// Break points for z-integration: grating 2 (kink of the arm separation) and the
    /// neighbourhood of the coil.
    fn z_breaks(&self) -> Vec<f64> {
        let [z1, z2, z3] = self.interferometer.gratings_z_m;
        let zc = self.coil_center().z;
        let r = self.coil.radius_m;
        let mut breaks = vec![z1, z2, z3];
        for k in [-5.0, -1.0, 0.0, 1.0, 5.0] {
            let z = zc + k * r;
            if z > z1 && z < z3 {
                breaks.push(z);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup();
        breaks
    }
}

/// A circular filament loop of `turns` coincident windings.
#[derive(Clone, Debug, PartialEq)]
pub struct CurrentLoop {
    pub center: Vector3<f64>,
    /// Unit normal; current circulates counter-clockwise about it for positive current.
    pub axis: Vector3<f64>,
    pub radius_m: f64,
    pub turns: u32,
}

/// Exact magnetostatic field of a circular loop (complete elliptic integrals).
pub fn loop_field(coil: &CurrentLoop, current_a: f64, point: Vector3<f64>) -> Result<Vector3<f64>> {
    let rel = point - coil.center;
    let zeta = rel.dot(&coil.axis);
    let radial = rel - coil.axis * zeta;
    let rho = radial.norm();
    let r = coil.radius_m;

    let alpha2 = (r - rho).powi(2) + zeta * zeta;
    let wire_distance = alpha2.sqrt();
    if wire_distance < SINGULARITY_DISTANCE_M {
        return Err(Error::Singularity {
            distance_m: wire_distance,
            min_m: SINGULARITY_DISTANCE_M,
        });
    }
    let beta2 = (r + rho).powi(2) + zeta * zeta;
    let beta = beta2.sqrt();
    let m = 4.0 * r * rho / beta2;
    let c = MU_0 * f64::from(coil.turns) * current_a / std::f64::consts::PI;

    let (k, e) = ellip_ke(m);
    let b_axial = c / (2.0 * alpha2 * beta) * ((r * r - rho * rho - zeta * zeta) * e + alpha2 * k);
    let mut field = coil.axis * b_axial;
    if rho > 0.0 {
        // (r^2 + rho^2 + zeta^2) E - alpha^2 K = beta^2 * kernel(m)
        let b_radial = c * zeta * beta / (2.0 * alpha2 * rho) * loop_radial_kernel(m);
        field += radial * (b_radial / rho);
    }
    Ok(field)
}

/// `|B|` on the beam midline at `z`.
pub fn field_magnitude(geom: &ExperimentGeometry, current_a: f64, z: f64) -> Result<f64> {
    Ok(geom.field_at(current_a, Vector3::new(0.0, 0.0, z))?.norm())
}

/// `d|B|/dx` across the beam midline at `z`, by Richardson-extrapolated central differences.
pub fn gradient_profile(geom: &ExperimentGeometry, current_a: f64, z: f64) -> Result<f64> {
    geom.check_z(z)?;
    transverse_gradient(geom, current_a, z)
}

fn transverse_gradient(geom: &ExperimentGeometry, current_a: f64, z: f64) -> Result<f64> {
    if current_a == 0.0 && !geom.has_ambient() {
        return Ok(0.0);
    }
    let lp = geom.current_loop();
    let ambient = Vector3::from(geom.ambient_field_t);
    let mag = |x: f64| -> Result<f64> {
        Ok((loop_field(&lp, current_a, Vector3::new(x, 0.0, z))? + ambient).norm())
    };
    let h = GRADIENT_STEP_M;
    let d1 = (mag(h)? - mag(-h)?) / (2.0 * h);
    let d2 = (mag(2.0 * h)? - mag(-2.0 * h)?) / (4.0 * h);
    Ok((4.0 * d1 - d2) / 3.0)
}

/// Separation between the two arms, triangular in z with its apex at the second grating.
pub fn path_separation(interf: &InterferometerGeometry, mass_kg: f64, v: f64, z: f64) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::domain(format!("velocity must be positive, got {v}")));
    }
    let [z1, _, z3] = interf.gratings_z_m;
    if !(z1..=z3).contains(&z) {
        return Err(Error::domain(format!("z = {z} m outside the interferometer [{z1}, {z3}]")));
    }
    Ok(interf.diffraction_angle(mass_kg, v) * arm_shape(interf, z))
}

/// `z - z1` before the second grating, `z3 - z` after it.
fn arm_shape(interf: &InterferometerGeometry, z: f64) -> f64 {
    let [z1, z2, z3] = interf.gratings_z_m;
    if z <= z2 {
        z - z1
    } else {
        z3 - z
    }
}

/// Dephasing of one sublevel from the full path integral along the midline.
///
/// In linear mode the local slope `dE/dB` is the constant `-g_F mu_B M_F`; in
/// Breit–Rabi mode it is evaluated at the local `|B(z)|`.
pub fn phase_integral(
    geom: &ExperimentGeometry,
    iso: &IsotopeSpec,
    s: &Sublevel,
    v: f64,
    current_a: f64,
    mode: ZeemanMode,
) -> Result<f64> {
    if !(v > 0.0) {
        return Err(Error::domain(format!("velocity must be positive, got {v}")));
    }
    Ok(phase_coefficient(geom, iso, s, current_a, mode)? / (v * v))
}

/// `v^2 * phase`: the velocity-independent part of `phase_integral`.
pub(crate) fn phase_coefficient(
    geom: &ExperimentGeometry,
    iso: &IsotopeSpec,
    s: &Sublevel,
    current_a: f64,
    mode: ZeemanMode,
) -> Result<f64> {
    geom.validate()?;
    iso.validate()?;
    let interf = &geom.interferometer;
    let slope_const = match mode {
        ZeemanMode::Linear => Some(zeeman_slope(iso, s, 0.0, ZeemanMode::Linear)?),
        ZeemanMode::BreitRabi => {
            zeeman_slope(iso, s, 0.0, ZeemanMode::BreitRabi)?;
            None
        }
    };
    if slope_const == Some(0.0) || (current_a == 0.0 && !geom.has_ambient()) {
        return Ok(0.0);
    }
    let mut failure = None;
    let integrand = |z: f64| -> f64 {
        let eval = || -> Result<f64> {
            let grad = transverse_gradient(geom, current_a, z)?;
            let slope = match slope_const {
                Some(c) => c,
                None => zeeman_slope(iso, s, field_magnitude(geom, current_a, z)?, mode)?,
            };
            Ok(slope * grad * arm_shape(interf, z))
        };
        match eval() {
            Ok(x) => x,
            Err(e) => {
                failure.get_or_insert(e);
                0.0
            }
        }
    };
    let integral = integrate_with_breaks(integrand, &geom.z_breaks(), Tolerance::new(0.0, PATH_INTEGRAL_RTOL))?;
    if let Some(e) = failure {
        return Err(e);
    }
    // theta = p h / (m v a) contributes one 1/v, the transit time the other
    let angle_times_v = f64::from(interf.order) * PLANCK / (iso.mass_kg * interf.grating_period());
    Ok(-angle_times_v / HBAR * integral.value)
}

/// Coupling constant `C` with `dphi = C p g_F M_F I / (m v^2)` in the linear regime.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct CouplingConstant(pub f64);

impl CouplingConstant {
    pub fn value(self) -> f64 {
        self.0
    }

    /// Dephasing from the scaling law.
    pub fn phase(self, order: u32, g_f_m_f: f64, current_a: f64, mass_kg: f64, v: f64) -> f64 {
        self.0 * f64::from(order) * g_f_m_f * current_a / (mass_kg * v * v)
    }
}

/// Reduces the geometry to `C = (2 pi mu_B / a) * integral of (d|B|/dx per ampere) * shape(z) dz`.
///
/// The ambient field is ignored: the scaling law presumes `|B|` proportional to the current.
pub fn reduce_to_coupling(geom: &ExperimentGeometry) -> Result<CouplingConstant> {
    geom.validate()?;
    let bare = ExperimentGeometry {
        ambient_field_t: [0.0; 3],
        ..geom.clone()
    };
    let interf = &bare.interferometer;
    let mut failure = None;
    let integrand = |z: f64| match transverse_gradient(&bare, 1.0, z) {
        Ok(g) => g * arm_shape(interf, z),
        Err(e) => {
            failure.get_or_insert(e);
            0.0
        }
    };
    let integral = integrate_with_breaks(integrand, &bare.z_breaks(), Tolerance::new(0.0, PATH_INTEGRAL_RTOL))?;
    if let Some(e) = failure {
        return Err(e);
    }
    let c = MU_B * PLANCK / (HBAR * interf.grating_period()) * integral.value;
    Ok(CouplingConstant(c))
}

/// One row of the field-profile export.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub z_m: f64,
    pub b_t: f64,
    pub dbdx_t_per_m: f64,
    pub dx_m: f64,
}

/// Samples `|B|`, `d|B|/dx` and the arm separation at `n` evenly spaced points over `[z1, z3]`.
pub fn field_profile(
    geom: &ExperimentGeometry,
    mass_kg: f64,
    v: f64,
    current_a: f64,
    n: usize,
) -> Result<Vec<FieldSample>> {
    geom.validate()?;
    if n < 2 {
        return Err(Error::domain("field profile needs at least two points"));
    }
    let [z1, _, z3] = geom.interferometer.gratings_z_m;
    (0..n)
        .map(|i| {
            let z = if i + 1 == n { z3 } else { z1 + (z3 - z1) * i as f64 / (n - 1) as f64 };
            Ok(FieldSample {
                z_m: z,
                b_t: field_magnitude(geom, current_a, z)?,
                dbdx_t_per_m: gradient_profile(geom, current_a, z)?,
                dx_m: path_separation(&geom.interferometer, mass_kg, v, z)?,
            })
        })
        .collect()
}
