//! Longitudinal velocity distribution of the atoms that contribute to the fringes.

use crate::error::{Error, Result};
use crate::quadrature::{integrate, QuadValue, Tolerance};

/// Integration support half-width, in units of the 1/e half-width.
pub const SUPPORT_WIDTHS: f64 = 6.0;

/// Gaussian velocity acceptance of the interferometer around the Bragg velocity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transmission {
    pub center_m_per_s: f64,
    /// Width expressed like a speed ratio: 1/e half-width is `center / s`.
    pub s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeamSpec {
    /// Most probable velocity (m/s).
    pub u_m_per_s: f64,
    /// Parallel speed ratio; `f64::INFINITY` means a monochromatic beam.
    pub s_par: f64,
    pub transmission: Option<Transmission>,
    /// Restores the `v^3` prefactor of the supersonic-beam distribution.
    pub v_cubed: bool,
}

impl BeamSpec {
    pub fn new(u_m_per_s: f64, s_par: f64) -> Self {
        BeamSpec {
            u_m_per_s,
            s_par,
            transmission: None,
            v_cubed: false,
        }
    }

    pub fn monochromatic(u_m_per_s: f64) -> Self {
        BeamSpec::new(u_m_per_s, f64::INFINITY)
    }

    pub fn with_transmission(mut self, center_m_per_s: f64, s: f64) -> Self {
        self.transmission = Some(Transmission { center_m_per_s, s });
        self
    }

    pub fn is_monochromatic(&self) -> bool {
        self.s_par.is_infinite()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.u_m_per_s > 0.0 && self.u_m_per_s.is_finite()) {
            return Err(Error::domain("most probable velocity must be positive"));
        }
        if !(self.s_par > 1.0) {
            return Err(Error::domain(format!("parallel speed ratio must exceed 1, got {}", self.s_par)));
        }
        if let Some(t) = self.transmission {
            if !(t.center_m_per_s > 0.0 && t.center_m_per_s.is_finite()) {
                return Err(Error::domain("transmission center must be positive"));
            }
            if !(t.s > 0.0 && t.s.is_finite()) {
                return Err(Error::domain("transmission width parameter must be positive and finite"));
            }
        }
        Ok(())
    }
}

/// Normalised `P(v)`: beam distribution times optional transmission (and `v^3`).
#[derive(Clone, Debug)]
pub struct VelocityDistribution {
    monochromatic: Option<f64>,
    center: f64,
    width: f64,
    v_cubed: bool,
    norm: f64,
    support: (f64, f64),
}

impl VelocityDistribution {
    pub fn new(beam: &BeamSpec) -> Result<Self> {
        beam.validate()?;
        let u = beam.u_m_per_s;
        if beam.is_monochromatic() {
            return Ok(VelocityDistribution {
                monochromatic: Some(u),
                center: u,
                width: 0.0,
                v_cubed: false,
                norm: 1.0,
                support: (u, u),
            });
        }
        let w0 = u / beam.s_par;
        let (center, width) = match beam.transmission {
            None => (u, w0),
            Some(t) => {
                let wt = t.center_m_per_s / t.s;
                let inv = 1.0 / (w0 * w0) + 1.0 / (wt * wt);
                let w2 = 1.0 / inv;
                (w2 * (u / (w0 * w0) + t.center_m_per_s / (wt * wt)), w2.sqrt())
            }
        };
        // <v^3> of a Gaussian with variance width^2 / 2
        let norm = if beam.v_cubed {
            center.powi(3) + 1.5 * center * width * width
        } else {
            1.0
        };
        let reach = if beam.v_cubed { SUPPORT_WIDTHS + 1.0 } else { SUPPORT_WIDTHS };
        let lo = (center - reach * width).max(0.1 * center);
        let hi = center + reach * width;
        Ok(VelocityDistribution {
            monochromatic: None,
            center,
            width,
            v_cubed: beam.v_cubed,
            norm,
            support: (lo, hi),
        })
    }

    pub fn is_monochromatic(&self) -> bool {
        self.monochromatic.is_some()
    }

    /// Velocity of the distribution's Gaussian core (m/s).
    pub fn center(&self) -> f64 {
        self.center
    }

    /// 1/e half-width of the Gaussian core (m/s); zero when monochromatic.
    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Probability density (s/m). Zero everywhere for a monochromatic beam.
    pub fn pdf(&self, v: f64) -> f64 {
        if self.monochromatic.is_some() || !(v > 0.0) {
            return 0.0;
        }
        let x = (v - self.center) / self.width;
        let g = (-x * x).exp() / (self.width * std::f64::consts::PI.sqrt());
        if self.v_cubed {
            v * v * v * g / self.norm
        } else {
            g
        }
    }

    /// `integral P(v) f(v) dv` over the support, or `f(u)` when monochromatic.
    pub fn average<T: QuadValue, F: FnMut(f64) -> T>(&self, mut f: F, tol: Tolerance) -> Result<T> {
        if let Some(u) = self.monochromatic {
            return Ok(f(u));
        }
        let (lo, hi) = self.support;
        let r = integrate(|v| f(v) * self.pdf(v), lo, hi, tol)?;
        Ok(r.value)
    }
}

/// `P(v)` for a beam specification.
pub fn velocity_pdf(beam: &BeamSpec, v: f64) -> Result<f64> {
    Ok(VelocityDistribution::new(beam)?.pdf(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn peak_value() {
        let beam = BeamSpec::new(1065.0, 8.5);
        let p = velocity_pdf(&beam, 1065.0).unwrap();
        assert!((p - 8.5 / (1065.0 * PI.sqrt())).abs() < 1e-18);
    }

    #[test]
    fn normalised_over_support() {
        for beam in [
            BeamSpec::new(1065.0, 8.5),
            BeamSpec::new(1065.0, 14.5),
            BeamSpec::new(1065.0, 9.0).with_transmission(1040.0, 12.0),
            BeamSpec { v_cubed: true, ..BeamSpec::new(1065.0, 9.0) },
        ] {
            let d = VelocityDistribution::new(&beam).unwrap();
            let total = d.average(|_| 1.0, Tolerance::new(0.0, 1e-13)).unwrap();
            assert!((total - 1.0).abs() < 1e-8, "{beam:?}: {total}");
        }
    }

    #[test]
    fn support_is_six_widths() {
        let d = VelocityDistribution::new(&BeamSpec::new(1065.0, 8.5)).unwrap();
        let (lo, hi) = d.support();
        assert!((lo - 1065.0 * (1.0 - 6.0 / 8.5)).abs() < 1e-9);
        assert!((hi - 1065.0 * (1.0 + 6.0 / 8.5)).abs() < 1e-9);
    }

    #[test]
    fn one_over_e_full_width() {
        let beam = BeamSpec::new(1065.0, 8.5);
        let d = VelocityDistribution::new(&beam).unwrap();
        let full = 2.0 * d.width();
        assert!((full - 250.588_235_294_117_65).abs() < 1e-9);
        let peak = d.pdf(1065.0);
        assert!((d.pdf(1065.0 + full / 2.0) / peak - (-1f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn transmission_narrows_and_shifts() {
        let plain = VelocityDistribution::new(&BeamSpec::new(1065.0, 9.0)).unwrap();
        let gated = VelocityDistribution::new(&BeamSpec::new(1065.0, 9.0).with_transmission(1000.0, 9.0)).unwrap();
        assert!(gated.width() < plain.width());
        assert!(gated.center() < 1065.0 && gated.center() > 1000.0);
    }

    #[test]
    fn invalid_beams() {
        assert!(BeamSpec::new(1065.0, 1.0).validate().is_err());
        assert!(BeamSpec::new(-5.0, 9.0).validate().is_err());
        assert!(BeamSpec::new(1065.0, 9.0).with_transmission(0.0, 3.0).validate().is_err());
        assert!(BeamSpec::monochromatic(1065.0).validate().is_ok());
    }
}
