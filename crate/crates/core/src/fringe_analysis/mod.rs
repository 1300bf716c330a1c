//! Visibility and phase extraction from raw fringe scans.

mod series;
mod synth;

pub use series::{relative_series, unwrap_phases, SeriesEntry};
pub use synth::{expected_counts, synthesize_scan, FringeTruth, ScanLayout};

use nalgebra::{DMatrix, DVector, Matrix3};
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const MIN_SAMPLES: usize = 8;
pub const MIN_SAMPLES_FOR_REJECTION: usize = 12;
pub const DEFAULT_OUTLIER_SIGMA: f64 = 5.0;
/// Largest fraction of a scan that outlier rejection may discard.
pub const MAX_REJECTED_FRACTION: f64 = 0.10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeSample {
    pub x3_m: f64,
    /// Detected counts in one dwell period; real-valued so noiseless model scans are representable.
    pub counts: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FringeScan {
    pub samples: Vec<FringeSample>,
    pub dwell_s: f64,
    /// Measured background rate (counts/s) with the beam flagged.
    pub background_cps: f64,
    /// Uncertainty of the background rate; required to co-fit it.
    pub background_sigma_cps: Option<f64>,
    pub current_a: f64,
    pub order: u32,
    pub k_l: f64,
    pub timestamp_s: f64,
}

impl FringeScan {
    /// Fringe period in x3: `pi / (p k_L)`.
    pub fn period(&self) -> f64 {
        PI / (f64::from(self.order) * self.k_l)
    }

    fn fringe_wavenumber(&self) -> f64 {
        2.0 * f64::from(self.order) * self.k_l
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples.len() < MIN_SAMPLES {
            return Err(Error::DataQuality(format!(
                "scan has {} samples, at least {MIN_SAMPLES} needed",
                self.samples.len()
            )));
        }
        if !(self.dwell_s > 0.0 && self.dwell_s.is_finite()) {
            return Err(Error::domain(format!("dwell time must be positive, got {}", self.dwell_s)));
        }
        if self.order == 0 || !(self.k_l > 0.0 && self.k_l.is_finite()) {
            return Err(Error::domain("diffraction order and k_L must be positive"));
        }
        if !(self.background_cps >= 0.0 && self.background_cps.is_finite()) {
            return Err(Error::domain("background rate must be nonnegative"));
        }
        if let Some(s) = self.samples.iter().find(|s| !(s.counts >= 0.0 && s.counts.is_finite() && s.x3_m.is_finite())) {
            return Err(Error::DataQuality(format!("invalid sample at x3 = {} m: {} counts", s.x3_m, s.counts)));
        }
        let (lo, hi) = self
            .samples
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.x3_m), hi.max(s.x3_m)));
        if hi - lo < self.period() * (1.0 - 1e-9) {
            return Err(Error::DataQuality(format!(
                "scan spans {:.4e} m, less than one fringe period {:.4e} m",
                hi - lo,
                self.period()
            )));
        }
        Ok(())
    }
}

/// Fringe parameters with standard errors. Rates are in counts/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeFit {
    pub mean_level_cps: f64,
    pub visibility: f64,
    pub phase_rad: f64,
    pub sigma_mean_level_cps: f64,
    pub sigma_visibility: f64,
    pub sigma_phase_rad: f64,
    pub background_cps: f64,
    pub sigma_background_cps: Option<f64>,
    pub chi2_reduced: f64,
    pub n_points: usize,
    /// The unconstrained optimum had `V > 1` and was clamped to 1.
    pub degenerate: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct FringeFitOptions {
    /// Fit the background too, constrained by its measured value and uncertainty.
    pub fit_background: bool,
}

/// Weighted least-squares fit with Poisson weights, background fixed at its measured value.
pub fn fit_fringe(scan: &FringeScan) -> Result<FringeFit> {
    fit_fringe_with(scan, FringeFitOptions::default())
}

/// The model `bg + A + A V cos(psi + phi0)` is linear in `(A, A V cos phi0, -A V sin phi0)`,
/// so the weighted optimum is found exactly by one linear solve.
pub fn fit_fringe_with(scan: &FringeScan, options: FringeFitOptions) -> Result<FringeFit> {
    scan.validate()?;
    let n = scan.samples.len();
    let dwell = scan.dwell_s;
    let kx = scan.fringe_wavenumber();
    let prior_sigma = if options.fit_background {
        match scan.background_sigma_cps {
            Some(s) if s > 0.0 && s.is_finite() => Some(s),
            _ => return Err(Error::domain("co-fitting the background needs a positive background uncertainty")),
        }
    } else {
        None
    };
    let n_par = if prior_sigma.is_some() { 4 } else { 3 };
    let rows = n + usize::from(prior_sigma.is_some());
    // rows scaled by 1/sigma, with rates as the fitted quantity
    let mut design = DMatrix::<f64>::zeros(rows, n_par);
    let mut rhs = DVector::<f64>::zeros(rows);
    for (i, s) in scan.samples.iter().enumerate() {
        let inv_sigma = dwell / s.counts.max(1.0).sqrt();
        let psi = kx * s.x3_m;
        design[(i, 0)] = inv_sigma;
        design[(i, 1)] = inv_sigma * psi.cos();
        design[(i, 2)] = inv_sigma * psi.sin();
        let rate = s.counts / dwell;
        match prior_sigma {
            Some(_) => {
                design[(i, 3)] = inv_sigma;
                rhs[i] = inv_sigma * rate;
            }
            None => rhs[i] = inv_sigma * (rate - scan.background_cps),
        }
    }
    if let Some(sb) = prior_sigma {
        design[(n, 3)] = 1.0 / sb;
        rhs[n] = scan.background_cps / sb;
    }
    let normal = design.transpose() * &design;
    let cov = normal
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Fit("fringe design matrix is singular; are the samples all at one phase?".into()))?;
    let theta = &cov * (design.transpose() * &rhs);
    let resid = &rhs - &design * &theta;
    let dof = rows as f64 - n_par as f64;
    let chi2_reduced = if dof > 0.0 { resid.norm_squared() / dof } else { f64::NAN };

    let (a, b, c) = (theta[0], theta[1], theta[2]);
    if !(a > 0.0) {
        return Err(Error::Fit(format!("fitted mean level {a:.4e} counts/s is not positive")));
    }
    let amp = b.hypot(c);
    let mut visibility = amp / a;
    let phase = (-c).atan2(b);
    // gradients of (V, phi) with respect to (a, b, c)
    let cov3 = Matrix3::from_fn(|i, j| cov[(i, j)]);
    let gv = if amp > 0.0 {
        nalgebra::Vector3::new(-amp / (a * a), b / (amp * a), c / (amp * a))
    } else {
        nalgebra::Vector3::new(0.0, 1.0 / a, 1.0 / a)
    };
    let gphi = if amp > 0.0 {
        nalgebra::Vector3::new(0.0, c / (amp * amp), -b / (amp * amp))
    } else {
        nalgebra::Vector3::zeros()
    };
    let sigma_visibility = (gv.transpose() * cov3 * gv)[0].max(0.0).sqrt();
    let sigma_phase = if amp > 0.0 {
        (gphi.transpose() * cov3 * gphi)[0].max(0.0).sqrt()
    } else {
        PI
    };
    let degenerate = visibility > 1.0;
    if degenerate {
        visibility = 1.0;
    }
    let (background_cps, sigma_background_cps) = match prior_sigma {
        Some(_) => (theta[3], Some(cov[(3, 3)].sqrt())),
        None => (scan.background_cps, None),
    };
    Ok(FringeFit {
        mean_level_cps: a,
        visibility,
        phase_rad: phase,
        sigma_mean_level_cps: cov[(0, 0)].sqrt(),
        sigma_visibility,
        sigma_phase_rad: sigma_phase,
        background_cps,
        sigma_background_cps,
        chi2_reduced,
        n_points: n,
        degenerate,
    })
}

/// Model counts for one sample under a fit.
pub fn model_counts(scan: &FringeScan, fit: &FringeFit, x3_m: f64) -> f64 {
    let psi = scan.fringe_wavenumber() * x3_m;
    scan.dwell_s * (fit.background_cps + fit.mean_level_cps * (1.0 + fit.visibility * (psi + fit.phase_rad).cos()))
}

/// A scan with outliers removed and the indices (into the original samples) that were dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct CleanedScan {
    pub scan: FringeScan,
    pub removed: Vec<usize>,
}

/// Drops detector bursts: repeatedly refits and removes the worst sample while its residual
/// exceeds `k` Poisson standard deviations of the model.
pub fn reject_outliers(scan: &FringeScan, k: f64) -> Result<CleanedScan> {
    let n = scan.samples.len();
    if n < MIN_SAMPLES_FOR_REJECTION {
        return Err(Error::DataQuality(format!(
            "outlier rejection needs at least {MIN_SAMPLES_FOR_REJECTION} samples, got {n}"
        )));
    }
    let budget = (MAX_REJECTED_FRACTION * n as f64).floor() as usize;
    let mut keep: Vec<usize> = (0..n).collect();
    let mut removed = Vec::new();
    loop {
        let current = FringeScan {
            samples: keep.iter().map(|&i| scan.samples[i]).collect(),
            ..scan.clone()
        };
        let fit = fit_fringe(&current)?;
        let worst = keep
            .iter()
            .enumerate()
            .map(|(pos, &i)| {
                let s = scan.samples[i];
                let mu = model_counts(scan, &fit, s.x3_m).max(1.0);
                (pos, (s.counts - mu).abs() / mu.sqrt())
            })
            .max_by(|a, b| a.1.total_cmp(&b.1));
        match worst {
            Some((pos, z)) if z > k => {
                if removed.len() == budget {
                    return Err(Error::DataQuality(format!(
                        "more than {:.0}% of {n} samples exceed {k} sigma",
                        MAX_REJECTED_FRACTION * 100.0
                    )));
                }
                removed.push(keep.remove(pos));
            }
            _ => {
                removed.sort_unstable();
                return Ok(CleanedScan { scan: current, removed });
            }
        }
    }
}

/// Wraps an angle into `(-pi, pi]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(2.0 * PI);
    if w > PI {
        w - 2.0 * PI
    } else {
        w
    }
}
