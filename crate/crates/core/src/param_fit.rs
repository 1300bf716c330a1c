//! Fits coupling constant, speed ratio and isotope contamination to measured `V_r(I)` curves.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field_geometry::CouplingConstant;
use crate::least_squares::{levenberg_marquardt, LmOptions, LmOutcome};
use crate::visibility_model::{visibility_curve, ModelConfig, PhaseSource, VisibilityPoint};

/// Starting speed ratios of the multi-start search.
pub const MULTI_START_S: [f64; 5] = [5.0, 8.5, 12.0, 16.0, 25.0];
pub const MAX_SPEED_RATIO: f64 = 100.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum FitParameter {
    /// Coupling constant `C` of the scaling law (kg m^2 s^-2 A^-1).
    Coupling,
    /// Distance from the beam midline to the coil center (m); needs a geometry phase source.
    CoilOffset,
    SpeedRatio,
    /// Signal fraction `f` carried by the second isotope component.
    Contamination,
}

impl FitParameter {
    pub fn name(self) -> &'static str {
        match self {
            FitParameter::Coupling => "coupling",
            FitParameter::CoilOffset => "coil_offset_m",
            FitParameter::SpeedRatio => "speed_ratio",
            FitParameter::Contamination => "contamination",
        }
    }
}

impl std::fmt::Display for FitParameter {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for FitParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "coupling" | "C" => Ok(FitParameter::Coupling),
            "coil_offset_m" | "coil_offset" => Ok(FitParameter::CoilOffset),
            "speed_ratio" | "s_par" => Ok(FitParameter::SpeedRatio),
            "contamination" | "f" => Ok(FitParameter::Contamination),
            other => Err(Error::domain(format!("unknown fit parameter `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ParameterSpec {
    pub parameter: FitParameter,
    pub initial: f64,
    pub lower: f64,
    pub upper: f64,
    pub free: bool,
}

impl ParameterSpec {
    pub fn free(parameter: FitParameter, initial: f64, lower: f64, upper: f64) -> Self {
        ParameterSpec {
            parameter,
            initial,
            lower,
            upper,
            free: true,
        }
    }

    pub fn fixed(parameter: FitParameter, value: f64) -> Self {
        ParameterSpec {
            parameter,
            initial: value,
            lower: value,
            upper: value,
            free: false,
        }
    }

    fn scale(&self) -> f64 {
        if self.initial != 0.0 {
            self.initial.abs()
        } else if (self.upper - self.lower).is_finite() && self.upper > self.lower {
            self.upper - self.lower
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitProblem {
    pub data: Vec<VisibilityPoint>,
    /// Template model; the listed parameters overwrite the matching fields.
    pub model: ModelConfig,
    pub parameters: Vec<ParameterSpec>,
    pub options: LmOptions,
}

impl FitProblem {
    pub fn new(data: Vec<VisibilityPoint>, model: ModelConfig, parameters: Vec<ParameterSpec>) -> Self {
        FitProblem {
            data,
            model,
            parameters,
            options: LmOptions::default(),
        }
    }

    fn free_count(&self) -> usize {
        self.parameters.iter().filter(|p| p.free).count()
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.parameters.iter().enumerate() {
            if self.parameters[..i].iter().any(|q| q.parameter == p.parameter) {
                return Err(Error::domain(format!("parameter {} listed twice", p.parameter)));
            }
            if !(p.lower.is_finite() && p.upper.is_finite() && p.initial.is_finite()) {
                return Err(Error::domain(format!("bounds of {} must be finite", p.parameter)));
            }
            if p.free && !(p.lower < p.upper) {
                return Err(Error::domain(format!("empty bound interval for {}", p.parameter)));
            }
            if !(p.lower..=p.upper).contains(&p.initial) {
                return Err(Error::domain(format!("initial {} = {} outside its bounds", p.parameter, p.initial)));
            }
            let range_ok = match p.parameter {
                FitParameter::Coupling => p.lower >= 0.0,
                FitParameter::CoilOffset => true,
                FitParameter::SpeedRatio => p.lower > 1.0 && p.upper <= MAX_SPEED_RATIO,
                FitParameter::Contamination => p.lower >= 0.0 && p.upper <= 1.0,
            };
            if !range_ok {
                return Err(Error::domain(format!("bounds [{}, {}] invalid for {}", p.lower, p.upper, p.parameter)));
            }
            match p.parameter {
                FitParameter::CoilOffset if !matches!(self.model.source, PhaseSource::Geometry(_)) => {
                    return Err(Error::domain("fitting the coil offset needs a geometry phase source"));
                }
                FitParameter::Contamination if self.model.components.len() != 2 => {
                    return Err(Error::domain("fitting contamination needs exactly two isotope components"));
                }
                _ => {}
            }
        }
        let free = self.free_count();
        if free == 0 {
            return Err(Error::domain("no free parameters"));
        }
        if self.data.len() < free + 2 {
            return Err(Error::domain(format!(
                "{} data points cannot constrain {free} free parameters (need at least {})",
                self.data.len(),
                free + 2
            )));
        }
        let with_sigma = self.data.iter().filter(|d| d.sigma_v_r.is_some()).count();
        if with_sigma != 0 && with_sigma != self.data.len() {
            return Err(Error::domain("either all or none of the data points must carry a V_r uncertainty"));
        }
        if let Some(d) = self.data.iter().find(|d| d.sigma_v_r.is_some_and(|s| !(s > 0.0))) {
            return Err(Error::domain(format!("nonpositive V_r uncertainty at {} A", d.current_a)));
        }
        Ok(())
    }

    /// Model with every parameter set to `values` (one per entry of `parameters`).
    pub fn apply(&self, values: &[f64]) -> ModelConfig {
        let mut m = self.model.clone();
        for (p, &v) in self.parameters.iter().zip(values) {
            match p.parameter {
                FitParameter::Coupling => m.source = PhaseSource::Coupling(CouplingConstant(v)),
                FitParameter::CoilOffset => {
                    if let PhaseSource::Geometry(g) = &mut m.source {
                        g.coil.center_offset_x_m = v;
                    }
                }
                FitParameter::SpeedRatio => m.beam.s_par = v,
                FitParameter::Contamination => {
                    m.components[0].weight = 1.0 - v;
                    m.components[1].weight = v;
                }
            }
        }
        m
    }

    fn currents(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.current_a).collect()
    }

    fn sigmas(&self) -> Vec<f64> {
        self.data.iter().map(|d| d.sigma_v_r.unwrap_or(1.0)).collect()
    }

    fn weighted(&self) -> bool {
        self.data.iter().all(|d| d.sigma_v_r.is_some())
    }

    /// Weighted residuals `(model - data) / sigma` at full parameter values.
    fn residuals(&self, values: &[f64], currents: &[f64], sigmas: &[f64]) -> Result<Vec<f64>> {
        let curve = visibility_curve(&self.apply(values), currents)?;
        Ok(curve
            .iter()
            .zip(&self.data)
            .zip(sigmas)
            .map(|((m, d), s)| (m.v_r - d.v_r) / s)
            .collect())
    }

    /// `chi2` at the given full parameter values.
    pub fn chi2(&self, values: &[f64]) -> Result<f64> {
        let r = self.residuals(values, &self.currents(), &self.sigmas())?;
        Ok(r.iter().map(|v| v * v).sum())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub parameter: FitParameter,
    pub value: f64,
    /// `None` for fixed parameters.
    pub std_error: Option<f64>,
    pub at_bound: bool,
}

/// Outcome of one start of the multi-start search.
#[derive(Clone, Debug, PartialEq)]
pub struct StartReport {
    pub index: usize,
    pub start: Vec<f64>,
    pub chi2: Option<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FitResult {
    pub estimates: Vec<Estimate>,
    pub chi2: f64,
    pub chi2_reduced: f64,
    pub dof: usize,
    /// `data - model` for each data point.
    pub residuals: Vec<f64>,
    pub model_v_r: Vec<f64>,
    /// Covariance of the free parameters, in the order they appear in the problem.
    pub covariance: DMatrix<f64>,
    /// Errors come from the data uncertainties rather than the residual scatter.
    pub weighted: bool,
    pub iterations: usize,
    pub final_step_norm: f64,
    pub best_start: usize,
    pub starts: Vec<StartReport>,
}

impl FitResult {
    pub fn get(&self, parameter: FitParameter) -> Option<&Estimate> {
        self.estimates.iter().find(|e| e.parameter == parameter)
    }

    pub fn values(&self) -> Vec<f64> {
        self.estimates.iter().map(|e| e.value).collect()
    }

    pub fn any_at_bound(&self) -> bool {
        self.estimates.iter().any(|e| e.at_bound)
    }
}

/// Multi-start Levenberg–Marquardt fit. Starts differ in the initial speed ratio when it is
/// free; the converged start with the lowest `chi2` wins, ties going to the lower index.
pub fn fit_visibility(problem: &FitProblem) -> Result<FitResult> {
    problem.validate()?;
    let base: Vec<f64> = problem.parameters.iter().map(|p| p.initial).collect();
    let starts: Vec<Vec<f64>> = match problem
        .parameters
        .iter()
        .position(|p| p.free && p.parameter == FitParameter::SpeedRatio)
    {
        Some(k) => {
            let p = problem.parameters[k];
            MULTI_START_S
                .iter()
                .map(|&s| {
                    let mut v = base.clone();
                    v[k] = s.clamp(p.lower, p.upper);
                    v
                })
                .collect()
        }
        None => vec![base],
    };
    fit_from_starts(problem, &starts)
}

fn fit_from_starts(problem: &FitProblem, starts: &[Vec<f64>]) -> Result<FitResult> {
    let outcomes: Vec<Result<LmOutcome>> = starts.par_iter().map(|s| run_start(problem, s)).collect();
    let mut reports = Vec::with_capacity(starts.len());
    let mut best: Option<(usize, &LmOutcome)> = None;
    for (i, (start, out)) in starts.iter().zip(&outcomes).enumerate() {
        let report = match out {
            Ok(o) => StartReport {
                index: i,
                start: start.clone(),
                chi2: Some(o.chi2),
                iterations: o.iterations,
                converged: o.converged,
                message: o.message.clone(),
            },
            Err(e) => StartReport {
                index: i,
                start: start.clone(),
                chi2: None,
                iterations: 0,
                converged: false,
                message: e.to_string(),
            },
        };
        reports.push(report);
        if let Ok(o) = out {
            if o.converged && best.is_none_or(|(_, b)| o.chi2 < b.chi2) {
                best = Some((i, o));
            }
        }
    }
    let Some((index, out)) = best else {
        let lines = reports
            .iter()
            .map(|r| {
                let chi2 = r.chi2.map_or("n/a".to_string(), |c| format!("{c:.6e}"));
                format!("start {} {:?}: chi2 {chi2}, {}", r.index, r.start, r.message)
            })
            .collect();
        return Err(Error::NonConvergence(lines));
    };
    finish(problem, out, index, reports)
}

fn free_indices(problem: &FitProblem) -> Vec<usize> {
    (0..problem.parameters.len()).filter(|&i| problem.parameters[i].free).collect()
}

fn run_start(problem: &FitProblem, start: &[f64]) -> Result<LmOutcome> {
    let free = free_indices(problem);
    let scales: Vec<f64> = free.iter().map(|&i| problem.parameters[i].scale()).collect();
    let currents = problem.currents();
    let sigmas = problem.sigmas();
    let full = |theta: &[f64]| {
        let mut v = start.to_vec();
        for (k, &i) in free.iter().enumerate() {
            v[i] = theta[k] * scales[k];
        }
        v
    };
    let f = |theta: &[f64]| problem.residuals(&full(theta), &currents, &sigmas);
    let x0: Vec<f64> = free.iter().zip(&scales).map(|(&i, s)| start[i] / s).collect();
    let lo: Vec<f64> = free.iter().zip(&scales).map(|(&i, s)| problem.parameters[i].lower / s).collect();
    let hi: Vec<f64> = free.iter().zip(&scales).map(|(&i, s)| problem.parameters[i].upper / s).collect();
    let mut out = levenberg_marquardt(f, &x0, &lo, &hi, problem.options)?;
    out.x = full(&out.x);
    Ok(out)
}

fn finish(problem: &FitProblem, out: &LmOutcome, index: usize, starts: Vec<StartReport>) -> Result<FitResult> {
    let free = free_indices(problem);
    let scales: Vec<f64> = free.iter().map(|&i| problem.parameters[i].scale()).collect();
    let n = problem.data.len();
    let dof = n - free.len();
    let chi2_reduced = out.chi2 / dof as f64;
    let weighted = problem.weighted();
    let jtj = out.jacobian.transpose() * &out.jacobian;
    let cov_scaled = jtj
        .try_inverse()
        .ok_or_else(|| Error::Fit("parameters are not identifiable: singular normal matrix at the optimum".into()))?;
    let factor = if weighted { 1.0 } else { chi2_reduced };
    let covariance = DMatrix::from_fn(free.len(), free.len(), |a, b| cov_scaled[(a, b)] * scales[a] * scales[b] * factor);
    let estimates = problem
        .parameters
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let value = out.x[i];
            let k = free.iter().position(|&j| j == i);
            let tol = 1e-9 * p.scale();
            Estimate {
                parameter: p.parameter,
                value,
                std_error: k.map(|k| covariance[(k, k)].max(0.0).sqrt()),
                at_bound: p.free && (value - p.lower <= tol || p.upper - value <= tol),
            }
        })
        .collect();
    let sigmas = problem.sigmas();
    let residuals: Vec<f64> = out.residuals.iter().zip(&sigmas).map(|(r, s)| -r * s).collect();
    let model_v_r = problem.data.iter().zip(&residuals).map(|(d, r)| d.v_r - r).collect();
    Ok(FitResult {
        estimates,
        chi2: out.chi2,
        chi2_reduced,
        dof,
        residuals,
        model_v_r,
        covariance,
        weighted,
        iterations: out.iterations,
        final_step_norm: out.last_step_norm,
        best_start: index,
        starts,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ProfilePoint {
    pub value: f64,
    /// `None` where re-optimisation failed.
    pub chi2: Option<f64>,
}

/// `chi2` with `parameter` pinned at each grid value and the other free parameters re-fitted
/// from the optimum in `result`.
pub fn profile_uncertainty(
    problem: &FitProblem,
    result: &FitResult,
    parameter: FitParameter,
    grid: &[f64],
) -> Result<Vec<ProfilePoint>> {
    problem.validate()?;
    let k = problem
        .parameters
        .iter()
        .position(|p| p.parameter == parameter)
        .ok_or_else(|| Error::domain(format!("{parameter} is not a parameter of this problem")))?;
    let best = result.values();
    Ok(grid
        .par_iter()
        .map(|&value| {
            let mut pinned = problem.clone();
            for (p, &b) in pinned.parameters.iter_mut().zip(&best) {
                p.initial = b;
            }
            pinned.parameters[k] = ParameterSpec::fixed(parameter, value);
            let mut start = best.clone();
            start[k] = value;
            let chi2 = if pinned.free_count() == 0 {
                pinned.chi2(&start).ok()
            } else {
                run_start(&pinned, &start).ok().filter(|o| o.converged).map(|o| o.chi2)
            };
            ProfilePoint { value, chi2 }
        })
        .collect())
}
