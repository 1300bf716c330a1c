//! Box-constrained Levenberg–Marquardt for small dense problems.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Converged when `|step| < step_tol * (|x| + step_tol)`.
    pub step_tol: f64,
    /// Converged when the projected gradient of `chi2 / 2` is below this (infinity norm).
    pub grad_tol: f64,
    /// Relative forward-difference step, applied as `fd_step * (1 + |x_j|)`.
    pub fd_step: f64,
    /// Central instead of forward differences, at twice the model evaluations per Jacobian.
    pub central_differences: bool,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            step_tol: 1e-8,
            grad_tol: 1e-10,
            fd_step: 1e-6,
            central_differences: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmOutcome {
    pub x: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Jacobian of the residuals at `x`.
    pub jacobian: DMatrix<f64>,
    pub chi2: f64,
    pub iterations: usize,
    pub last_step_norm: f64,
    pub converged: bool,
    pub message: String,
}

fn chi2(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

fn evaluate<F>(f: &F, x: &[f64], n: usize) -> Option<Vec<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    match f(x) {
        Ok(r) if r.len() == n && r.iter().all(|v| v.is_finite()) => Some(r),
        _ => None,
    }
}

/// Finite-difference Jacobian. Forward differences step backwards where a forward step would
/// leave the box; central differences fall back to one-sided steps at a bound.
pub fn fd_jacobian<F>(
    f: &F,
    x: &[f64],
    r0: &[f64],
    lower: &[f64],
    upper: &[f64],
    rel_step: f64,
    central: bool,
) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let m = r0.len();
    let mut jac = DMatrix::zeros(m, x.len());
    let eval = |xs: &[f64], j: usize| {
        evaluate(f, xs, m).ok_or_else(|| Error::Fit(format!("model failed during differentiation of parameter {j}")))
    };
    for j in 0..x.len() {
        let h = rel_step * (1.0 + x[j].abs());
        if central && x[j] - h >= lower[j] && x[j] + h <= upper[j] {
            let mut xp = x.to_vec();
            let mut xm = x.to_vec();
            xp[j] = x[j] + h;
            xm[j] = x[j] - h;
            let (rp, rm) = (eval(&xp, j)?, eval(&xm, j)?);
            let span = xp[j] - xm[j];
            for i in 0..m {
                jac[(i, j)] = (rp[i] - rm[i]) / span;
            }
            continue;
        }
        let h = if x[j] + h > upper[j] { -h } else { h };
        let mut xp = x.to_vec();
        xp[j] = (x[j] + h).max(lower[j]);
        let h = xp[j] - x[j];
        let rp = eval(&xp, j)?;
        for i in 0..m {
            jac[(i, j)] = (rp[i] - r0[i]) / h;
        }
    }
    Ok(jac)
}

/// Minimises `sum r_i(x)^2` subject to `lower <= x <= upper`.
pub fn levenberg_marquardt<F>(f: F, x0: &[f64], lower: &[f64], upper: &[f64], opts: LmOptions) -> Result<LmOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    if lower.len() != n || upper.len() != n {
        return Err(Error::domain("bounds and start differ in length"));
    }
    if (0..n).any(|j| !(lower[j] < upper[j])) {
        return Err(Error::domain("each lower bound must be below its upper bound"));
    }
    let mut x: Vec<f64> = (0..n).map(|j| x0[j].clamp(lower[j], upper[j])).collect();
    let mut r = f(&x)?;
    let m = r.len();
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("model is not finite at the starting point".into()));
    }
    let mut cost = chi2(&r);
    let mut lambda = 1e-3;
    let mut last_step = f64::NAN;
    let mut jac = fd_jacobian(&f, &x, &r, lower, upper, opts.fd_step, opts.central_differences)?;
    for iter in 1..=opts.max_iterations {
        let rv = DVector::from_column_slice(&r);
        let g = jac.transpose() * &rv;
        let a = jac.transpose() * &jac;
        let proj_grad = (0..n)
            .map(|j| {
                let pinned_low = x[j] <= lower[j] && g[j] > 0.0;
                let pinned_high = x[j] >= upper[j] && g[j] < 0.0;
                if pinned_low || pinned_high {
                    0.0
                } else {
                    g[j].abs()
                }
            })
            .fold(0.0, f64::max);
        if proj_grad < opts.grad_tol {
            return Ok(done(x, r, jac, cost, iter - 1, last_step, true, "gradient below tolerance"));
        }
        let diag_floor = 1e-12 * (0..n).map(|j| a[(j, j)]).fold(0.0, f64::max).max(1e-300);
        loop {
            let mut damped = a.clone();
            for j in 0..n {
                damped[(j, j)] += lambda * a[(j, j)].max(diag_floor);
            }
            let step = damped.cholesky().map(|c| c.solve(&(-&g)));
            let Some(step) = step else {
                lambda *= 10.0;
                if lambda > 1e16 {
                    return Ok(done(x, r, jac, cost, iter, last_step, false, "damped normal matrix is singular"));
                }
                continue;
            };
            let trial: Vec<f64> = (0..n).map(|j| (x[j] + step[j]).clamp(lower[j], upper[j])).collect();
            let dx: f64 = (0..n).map(|j| (trial[j] - x[j]).powi(2)).sum::<f64>().sqrt();
            let xnorm: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
            let small = dx < opts.step_tol * (xnorm + opts.step_tol);
            match evaluate(&f, &trial, m) {
                Some(rt) if chi2(&rt) <= cost => {
                    let improved = chi2(&rt) < cost;
                    x = trial;
                    cost = chi2(&rt);
                    r = rt;
                    last_step = dx;
                    lambda = (lambda / 3.0).max(1e-12);
                    if small || !improved {
                        let jac = fd_jacobian(&f, &x, &r, lower, upper, opts.fd_step, opts.central_differences)?;
                        return Ok(done(x, r, jac, cost, iter, last_step, true, "relative step below tolerance"));
                    }
                    jac = fd_jacobian(&f, &x, &r, lower, upper, opts.fd_step, opts.central_differences)?;
                    break;
                }
                _ => {
                    if small {
                        return Ok(done(x, r, jac, cost, iter, dx, true, "relative step below tolerance"));
                    }
                    lambda *= 4.0;
                }
            }
        }
    }
    Ok(done(x, r, jac, cost, opts.max_iterations, last_step, false, "iteration limit reached"))
}

#[allow(clippy::too_many_arguments)]
fn done(
    x: Vec<f64>,
    residuals: Vec<f64>,
    jacobian: DMatrix<f64>,
    chi2: f64,
    iterations: usize,
    last_step_norm: f64,
    converged: bool,
    message: &str,
) -> LmOutcome {
    LmOutcome {
        x,
        residuals,
        jacobian,
        chi2,
        iterations,
        last_step_norm,
        converged,
        message: message.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Ok(vec![10.0 * (x[1] - x[0] * x[0]), 1.0 - x[0]]);
        let out = levenberg_marquardt(f, &[-1.2, 1.0], &[-5.0, -5.0], &[5.0, 5.0], LmOptions::default()).unwrap();
        assert!(out.converged, "{}", out.message);
        assert!((out.x[0] - 1.0).abs() < 1e-7 && (out.x[1] - 1.0).abs() < 1e-7, "{:?}", out.x);
    }

    #[test]
    fn exponential_decay_fit() {
        let t: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.2).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-0.7 * t).exp() + 0.3).collect();
        let f = |p: &[f64]| Ok(t.iter().zip(&y).map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y).collect());
        let out = levenberg_marquardt(f, &[1.0, 0.2, 0.0], &[0.0, 0.0, -1.0], &[10.0, 10.0, 1.0], LmOptions::default()).unwrap();
        assert!(out.converged);
        for (got, want) in out.x.iter().zip([2.5, 0.7, 0.3]) {
            assert!((got - want).abs() < 1e-6, "{:?}", out.x);
        }
    }

    #[test]
    fn bound_is_respected() {
        // unconstrained minimum at x = 3
        let f = |x: &[f64]| Ok(vec![x[0] - 3.0]);
        let out = levenberg_marquardt(f, &[0.0], &[-1.0], &[2.0], LmOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.x[0], 2.0);
    }

    #[test]
    fn failing_model_at_start_is_an_error() {
        let f = |_: &[f64]| Ok(vec![f64::NAN]);
        assert!(levenberg_marquardt(f, &[0.0], &[-1.0], &[1.0], LmOptions::default()).is_err());
    }
}
