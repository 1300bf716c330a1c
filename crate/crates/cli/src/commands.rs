use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use gradphase::field_geometry::field_profile;
use gradphase::fringe_analysis::{
    fit_fringe_with, reject_outliers, relative_series, FringeFit, FringeFitOptions, FringeScan, SeriesEntry,
};
use gradphase::io::{fmt_num, read_manifest, read_scan_csv, read_visibility_csv, visibility_csv, write_atomic};
use gradphase::param_fit::{
    fit_visibility, profile_uncertainty, FitParameter, FitProblem, FitResult, ParameterSpec, MAX_SPEED_RATIO,
};
use gradphase::visibility_model::{add_visibility_noise, visibility_curve, PhaseSource};
use gradphase::{Error, Result};

use crate::model;
use crate::run::Run;

fn write(out: &Path, name: &str, text: &str, written: &mut Vec<PathBuf>) -> Result<()> {
    let path = out.join(name);
    write_atomic(&path, text.as_bytes())?;
    written.push(path);
    Ok(())
}

pub fn simulate(run: &Run, out: &Path) -> Result<Vec<PathBuf>> {
    let m = model::model(run)?;
    let currents = model::currents(run)?;
    let seed: u64 = run.get_or("seed", 42)?;
    let sigma: f64 = run.get_or("noise.sigma_v_r", 0.0)?;
    let export_field: bool = run.get_or("field.export", false)?;
    let mut points = visibility_curve(&m, &currents)?;
    if sigma > 0.0 {
        points = add_visibility_noise(&points, sigma, seed)?;
    } else if sigma < 0.0 {
        return Err(Error::config("noise.sigma_v_r", "must be nonnegative"));
    }
    let mut written = Vec::new();
    write(out, "visibility.csv", &visibility_csv(&points), &mut written)?;
    if export_field {
        write_field_profile(run, &m, out, &mut written)?;
    }
    Ok(written)
}

pub fn export_field(run: &Run, out: &Path) -> Result<Vec<PathBuf>> {
    let m = model::model(run)?;
    let mut written = Vec::new();
    write_field_profile(run, &m, out, &mut written)?;
    Ok(written)
}

fn write_field_profile(
    run: &Run,
    m: &gradphase::visibility_model::ModelConfig,
    out: &Path,
    written: &mut Vec<PathBuf>,
) -> Result<()> {
    let order = m.order;
    let geom = model::geometry(run, order)?;
    let current: f64 = run.get_or("field.current_a", 1.0)?;
    let n: usize = run.get_or("field.samples", 401)?;
    let v: f64 = run.get_or("field.velocity_m_per_s", m.beam.u_m_per_s)?;
    let mass = m.components[0].isotope.mass_kg;
    let samples = field_profile(&geom, mass, v, current, n)?;
    let mut text = String::from("z_m,B_T,dBdx_T_per_m,dx_m\n");
    for s in samples {
        let _ = writeln!(
            text,
            "{},{},{},{}",
            fmt_num(s.z_m),
            fmt_num(s.b_t),
            fmt_num(s.dbdx_t_per_m),
            fmt_num(s.dx_m)
        );
    }
    write(out, "field_profile.csv", &text, written)
}

fn bounds(run: &Run, p: FitParameter, initial: f64, lower: f64, upper: f64) -> Result<ParameterSpec> {
    let key = |field: &str| format!("fit.{}.{field}", p.name());
    Ok(ParameterSpec::free(
        p,
        run.get_or(&key("initial"), initial)?,
        run.get_or(&key("lower"), lower)?,
        run.get_or(&key("upper"), upper)?,
    ))
}

pub fn fit(run: &Run, out: &Path) -> Result<Vec<PathBuf>> {
    let data_path = run.require_path("fit.data")?;
    let data = read_visibility_csv(&data_path)?;
    let mut m = model::model(run)?;
    let names: Vec<String> = run.list_or("fit.free", &["coupling".to_string(), "speed_ratio".to_string()])?;
    let mut params = Vec::new();
    for name in &names {
        let p: FitParameter = name.parse().map_err(|e: Error| Error::config("fit.free", e.to_string()))?;
        let spec = match p {
            FitParameter::Coupling => {
                let c0 = model::nominal_coupling(&m)?;
                if matches!(m.source, PhaseSource::Geometry(_)) && (m.mode != gradphase::atomic_levels::ZeemanMode::Linear) {
                    return Err(Error::config("fit.free", "the coupling constant can only be fitted in linear mode"));
                }
                m.source = PhaseSource::Coupling(gradphase::field_geometry::CouplingConstant(c0));
                bounds(run, p, c0, 0.0, 100.0 * c0.abs())?
            }
            FitParameter::SpeedRatio => bounds(run, p, m.beam.s_par, 1.5, MAX_SPEED_RATIO)?,
            FitParameter::Contamination => {
                let f0 = m.components.get(1).map_or(0.0, |c| c.weight);
                bounds(run, p, f0, 0.0, 1.0)?
            }
            FitParameter::CoilOffset => {
                let PhaseSource::Geometry(g) = &m.source else {
                    return Err(Error::config("fit.free", "coil_offset_m needs the geometry phase source (remove `coupling`)"));
                };
                let d0 = g.coil.center_offset_x_m;
                bounds(run, p, d0, 0.1 * d0, 10.0 * d0)?
            }
        };
        params.push(spec);
    }
    let profile: Option<String> = run.get("fit.profile")?;
    let profile_points: usize = if profile.is_some() { run.get_or("fit.profile.points", 21)? } else { 0 };
    let profile_width: f64 = if profile.is_some() { run.get_or("fit.profile.width", 3.0)? } else { 0.0 };
    let mut problem = FitProblem::new(data, m, params);
    let defaults = problem.options;
    problem.options.max_iterations = run.get_or("fit.max_iterations", defaults.max_iterations)?;
    problem.options.step_tol = run.get_or("fit.step_tol", defaults.step_tol)?;
    problem.options.central_differences = run.get_or("fit.central_differences", defaults.central_differences)?;
    problem.validate().map_err(|e| Error::config("fit", e.to_string()))?;
    let result = fit_visibility(&problem)?;

    let mut written = Vec::new();
    write(out, "fit_report.txt", &report(&result, &data_path), &mut written)?;
    write(out, "fit_residuals.csv", &residual_table(&problem, &result), &mut written)?;
    if let Some(name) = profile {
        let p: FitParameter = name.parse().map_err(|e: Error| Error::config("fit.profile", e.to_string()))?;
        let est = result
            .get(p)
            .ok_or_else(|| Error::config("fit.profile", format!("{p} is not a fitted parameter")))?;
        let half = profile_width * est.std_error.unwrap_or(0.0);
        let n = profile_points.max(2);
        let spec = problem.parameters.iter().find(|s| s.parameter == p).expect("parameter present");
        let grid: Vec<f64> = (0..n)
            .map(|i| (est.value - half + 2.0 * half * i as f64 / (n - 1) as f64).clamp(spec.lower, spec.upper))
            .collect();
        let prof = profile_uncertainty(&problem, &result, p, &grid)?;
        let mut text = format!("{},chi2\n", p.name());
        for pt in prof {
            let _ = writeln!(text, "{},{}", fmt_num(pt.value), pt.chi2.map(fmt_num).unwrap_or_default());
        }
        write(out, &format!("profile_{}.csv", p.name()), &text, &mut written)?;
    }
    Ok(written)
}

fn report(result: &FitResult, data: &Path) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "data = {}", data.display());
    for e in &result.estimates {
        let _ = writeln!(s, "{} = {}", e.parameter.name(), fmt_num(e.value));
        if let Some(err) = e.std_error {
            let _ = writeln!(s, "{}.std_error = {}", e.parameter.name(), fmt_num(err));
        }
        if e.at_bound {
            let _ = writeln!(s, "{}.at_bound = true", e.parameter.name());
        }
    }
    let _ = writeln!(s, "chi2 = {}", fmt_num(result.chi2));
    let _ = writeln!(s, "chi2_reduced = {}", fmt_num(result.chi2_reduced));
    let _ = writeln!(s, "dof = {}", result.dof);
    let _ = writeln!(s, "weighted = {}", result.weighted);
    let _ = writeln!(s, "iterations = {}", result.iterations);
    let _ = writeln!(s, "final_step_norm = {}", fmt_num(result.final_step_norm));
    let _ = writeln!(s, "best_start = {}", result.best_start);
    for st in &result.starts {
        let start: Vec<String> = st.start.iter().map(|v| fmt_num(*v)).collect();
        let _ = writeln!(
            s,
            "start.{} = [{}] chi2 {} iterations {} converged {} ({})",
            st.index,
            start.join(", "),
            st.chi2.map(fmt_num).unwrap_or_else(|| "n/a".into()),
            st.iterations,
            st.converged,
            st.message
        );
    }
    s
}

fn residual_table(problem: &FitProblem, result: &FitResult) -> String {
    let mut s = String::from("current_A,V_r_data,V_r_model,residual,sigma_V_r\n");
    for ((d, m), r) in problem.data.iter().zip(&result.model_v_r).zip(&result.residuals) {
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            fmt_num(d.current_a),
            fmt_num(d.v_r),
            fmt_num(*m),
            fmt_num(*r),
            d.sigma_v_r.map(fmt_num).unwrap_or_default()
        );
    }
    s
}

struct FittedScan {
    name: String,
    current_a: f64,
    timestamp_s: f64,
    is_reference: bool,
    fit: FringeFit,
    removed: Vec<(usize, f64, f64)>,
}

pub fn fringes(run: &Run, out: &Path) -> Result<Vec<PathBuf>> {
    let manifest_path = run.require_path("fringes.manifest")?;
    let order = model::order(run)?;
    let geom = model::geometry(run, order)?;
    let dwell: f64 = run.get_or("fringes.dwell_s", 0.1)?;
    let background: f64 = run.get_or("fringes.background_cps", 0.0)?;
    let background_sigma: Option<f64> = run.get("fringes.background_sigma_cps")?;
    let options = FringeFitOptions {
        fit_background: run.get_or("fringes.fit_background", false)?,
    };
    let clean: bool = run.get_or("fringes.reject_outliers", true)?;
    let k_sigma: f64 = run.get_or("fringes.outlier_sigma", 5.0)?;
    let allow_extrapolation: bool = run.get_or("fringes.allow_extrapolation", false)?;

    let manifest = read_manifest(&manifest_path)?;
    let missing: Vec<String> = manifest
        .iter()
        .filter(|e| !e.file.is_file())
        .map(|e| format!("line {}: {}", e.line, e.file.display()))
        .collect();
    if !missing.is_empty() {
        return Err(Error::DataQuality(format!(
            "manifest {} lists scans that do not exist:\n  {}",
            manifest_path.display(),
            missing.join("\n  ")
        )));
    }
    if !manifest.iter().any(|e| e.is_reference) {
        return Err(Error::DataQuality(format!("manifest {} has no reference scans", manifest_path.display())));
    }
    let mut fitted = Vec::with_capacity(manifest.len());
    for e in &manifest {
        let scan = FringeScan {
            samples: read_scan_csv(&e.file)?,
            dwell_s: dwell,
            background_cps: background,
            background_sigma_cps: background_sigma,
            current_a: e.current_a,
            order,
            k_l: geom.interferometer.k_l(),
            timestamp_s: e.timestamp_s,
        };
        let (scan_used, removed) = if clean {
            let c = reject_outliers(&scan, k_sigma).map_err(|err| annotate(&e.file, err))?;
            let removed = c
                .removed
                .iter()
                .map(|&i| (i, scan.samples[i].x3_m, scan.samples[i].counts))
                .collect();
            (c.scan, removed)
        } else {
            (scan, Vec::new())
        };
        let fit = fit_fringe_with(&scan_used, options).map_err(|err| annotate(&e.file, err))?;
        let name = e
            .file
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        fitted.push(FittedScan {
            name,
            current_a: e.current_a,
            timestamp_s: e.timestamp_s,
            is_reference: e.is_reference,
            fit,
            removed,
        });
    }
    let entry = |f: &FittedScan| SeriesEntry {
        timestamp_s: f.timestamp_s,
        current_a: f.current_a,
        fit: f.fit,
    };
    let mut refs: Vec<SeriesEntry> = fitted.iter().filter(|f| f.is_reference).map(entry).collect();
    refs.sort_by(|a, b| a.timestamp_s.total_cmp(&b.timestamp_s));
    let scans: Vec<SeriesEntry> = fitted.iter().filter(|f| !f.is_reference).map(entry).collect();
    let series = relative_series(&scans, &refs, allow_extrapolation)?;

    let mut fits = String::from(
        "file,current_A,timestamp_s,is_reference,mean_level_cps,sigma_mean_level_cps,visibility,sigma_visibility,phase_rad,sigma_phase_rad,background_cps,chi2_reduced,n_points,removed_points,degenerate\n",
    );
    let mut outliers = String::from("file,index,x3_m,counts\n");
    for f in &fitted {
        let r = &f.fit;
        let _ = writeln!(
            fits,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            f.name,
            fmt_num(f.current_a),
            fmt_num(f.timestamp_s),
            f.is_reference,
            fmt_num(r.mean_level_cps),
            fmt_num(r.sigma_mean_level_cps),
            fmt_num(r.visibility),
            fmt_num(r.sigma_visibility),
            fmt_num(r.phase_rad),
            fmt_num(r.sigma_phase_rad),
            fmt_num(r.background_cps),
            fmt_num(r.chi2_reduced),
            r.n_points,
            f.removed.len(),
            r.degenerate
        );
        for (i, x, c) in &f.removed {
            let _ = writeln!(outliers, "{},{},{},{}", f.name, i, fmt_num(*x), fmt_num(*c));
        }
    }
    let mut written = Vec::new();
    write(out, "fringe_fits.csv", &fits, &mut written)?;
    write(out, "outliers.csv", &outliers, &mut written)?;
    write(out, "visibility.csv", &visibility_csv(&series), &mut written)?;
    Ok(written)
}

fn annotate(file: &Path, err: Error) -> Error {
    match err {
        Error::DataQuality(m) => Error::DataQuality(format!("{}: {m}", file.display())),
        Error::Fit(m) => Error::Fit(format!("{}: {m}", file.display())),
        other => other,
    }
}
