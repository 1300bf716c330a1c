use std::f64::consts::PI;

use gradphase::atomic_levels::IsotopeSpec;
use gradphase::field_geometry::{reduce_to_coupling, CouplingConstant, ExperimentGeometry};
use gradphase::fringe_analysis::{fit_fringe, synthesize_scan, FringeTruth, ScanLayout};
use gradphase::param_fit::{fit_visibility, profile_uncertainty, FitParameter, FitProblem, ParameterSpec, MAX_SPEED_RATIO};
use gradphase::visibility_model::{
    add_visibility_noise, visibility_curve, BeamSpec, ModelConfig, PhaseSource, SublevelPopulation, VisibilityPoint,
};
use gradphase::HalfInt;

const U: f64 = 1065.0;

fn pumped_li7(beam: BeamSpec, source: PhaseSource) -> ModelConfig {
    let li7 = IsotopeSpec::li7();
    let pop = SublevelPopulation::pumped(&li7, HalfInt::from_int(1)).unwrap();
    ModelConfig::single(li7, pop, beam, source)
}

/// Currents reaching an M_F = +-1 phase of `reach` at the most probable velocity.
fn currents(model: &ModelConfig, c: f64, reach: f64, n: usize) -> Vec<f64> {
    let iso = &model.components[0].isotope;
    let per_amp = CouplingConstant(c)
        .phase(model.order, 0.5, 1.0, iso.mass_kg, model.beam.u_m_per_s)
        .abs();
    (1..=n).map(|k| reach / per_amp * k as f64 / n as f64).collect()
}

fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

#[test]
fn profile_interval_covers_truth() {
    let c = reduce_to_coupling(&ExperimentGeometry::default()).unwrap().0;
    let model = pumped_li7(BeamSpec::new(U, 9.0), PhaseSource::Coupling(CouplingConstant(c)));
    let clean = visibility_curve(&model, &currents(&model, c, 27.0, 20)).unwrap();
    let trials = 100;
    let mut covered = 0;
    for t in 0..trials {
        let data = add_visibility_noise(&clean, 0.02, 7000 + t).unwrap();
        let problem = FitProblem::new(
            data,
            model.clone(),
            vec![
                ParameterSpec::free(FitParameter::Coupling, c, 0.0, 100.0 * c),
                ParameterSpec::free(FitParameter::SpeedRatio, 8.5, 1.5, MAX_SPEED_RATIO),
            ],
        );
        let fit = fit_visibility(&problem).unwrap();
        // the truth lies inside the delta chi2 = 1 interval exactly when its profile rises by at most 1
        let profile = profile_uncertainty(&problem, &fit, FitParameter::SpeedRatio, &[9.0]).unwrap();
        if profile[0].chi2.is_some_and(|chi2| chi2 - fit.chi2 <= 1.0) {
            covered += 1;
        }
    }
    assert!(covered >= 60, "profile interval covered the truth in {covered}/{trials} trials");
}

#[test]
fn mean_level_precision_scales_with_dwell() {
    let k_l = 2.0 * PI / 671e-9;
    let truth = FringeTruth {
        mean_level_cps: 5000.0,
        visibility: 0.75,
        phase_rad: 1.0,
        background_cps: 100.0,
    };
    let dwells = [0.025, 0.05, 0.1, 0.2, 0.4];
    let points: Vec<(f64, f64)> = dwells
        .iter()
        .map(|&dwell| {
            let layout = ScanLayout::uniform(50, 2.0, dwell, 1, k_l);
            let levels: Vec<f64> = (0..2000)
                .map(|seed| fit_fringe(&synthesize_scan(&truth, &layout, seed).unwrap()).unwrap().mean_level_cps)
                .collect();
            (dwell.ln(), std_dev(&levels).ln())
        })
        .collect();
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
    assert!((slope + 0.5).abs() <= 0.05, "log-log slope {slope}");
}

#[test]
fn coupling_and_coil_offset_fits_agree() {
    let geom = ExperimentGeometry::default();
    let c = reduce_to_coupling(&geom).unwrap().0;
    let truth = pumped_li7(BeamSpec::new(U, 9.0), PhaseSource::Geometry(geom.clone()));
    let clean = visibility_curve(&truth, &currents(&truth, c, 27.0, 20)).unwrap();
    let data = add_visibility_noise(&clean, 0.02, 5).unwrap();

    let mut offset_geom = geom.clone();
    offset_geom.coil.center_offset_x_m = 0.009;
    let by_offset = FitProblem::new(
        data.clone(),
        pumped_li7(BeamSpec::new(U, 9.0), PhaseSource::Geometry(offset_geom)),
        vec![
            ParameterSpec::free(FitParameter::CoilOffset, 0.009, 0.0035, 0.03),
            ParameterSpec::free(FitParameter::SpeedRatio, 8.5, 1.5, MAX_SPEED_RATIO),
        ],
    );
    let by_coupling = FitProblem::new(
        data,
        pumped_li7(BeamSpec::new(U, 9.0), PhaseSource::Coupling(CouplingConstant(0.8 * c))),
        vec![
            ParameterSpec::free(FitParameter::Coupling, 0.8 * c, 0.0, 100.0 * c),
            ParameterSpec::free(FitParameter::SpeedRatio, 8.5, 1.5, MAX_SPEED_RATIO),
        ],
    );
    // central differences and a tight step tolerance put both fits on the objective's own minimum
    let (mut by_offset, mut by_coupling) = (by_offset, by_coupling);
    for problem in [&mut by_offset, &mut by_coupling] {
        problem.options.step_tol = 1e-13;
        problem.options.central_differences = true;
    }
    let a = fit_visibility(&by_offset).unwrap();
    let b = fit_visibility(&by_coupling).unwrap();
    for (x, y) in a.model_v_r.iter().zip(&b.model_v_r) {
        assert!((x - y).abs() <= 1e-8, "{x} vs {y}");
    }
}

#[test]
fn coupling_and_coil_offset_objectives_agree() {
    let geom = ExperimentGeometry::default();
    let c = reduce_to_coupling(&geom).unwrap().0;
    let truth = pumped_li7(BeamSpec::new(U, 9.0), PhaseSource::Geometry(geom.clone()));
    let data = add_visibility_noise(&visibility_curve(&truth, &currents(&truth, c, 27.0, 20)).unwrap(), 0.02, 9).unwrap();
    let by_offset = FitProblem::new(
        data.clone(),
        truth.clone(),
        vec![ParameterSpec::free(FitParameter::CoilOffset, 0.007, 0.0035, 0.03)],
    );
    let by_coupling = FitProblem::new(
        data,
        pumped_li7(BeamSpec::new(U, 9.0), PhaseSource::Coupling(CouplingConstant(c))),
        vec![ParameterSpec::free(FitParameter::Coupling, c, 0.0, 100.0 * c)],
    );
    for offset in [0.004, 0.006, 0.01, 0.02] {
        let mut g = geom.clone();
        g.coil.center_offset_x_m = offset;
        let mapped = reduce_to_coupling(&g).unwrap().0;
        let x = by_offset.chi2(&[offset]).unwrap();
        let y = by_coupling.chi2(&[mapped]).unwrap();
        assert!((x - y).abs() <= 1e-8 * x.max(1.0), "offset {offset}: {x} vs {y}");
    }
}

fn effective_s(order: u32, transmission_s: f64) -> f64 {
    let c = reduce_to_coupling(&ExperimentGeometry::default()).unwrap().0;
    let source = PhaseSource::Coupling(CouplingConstant(c));
    let mut truth = pumped_li7(BeamSpec::new(U, 6.0).with_transmission(U, transmission_s), source.clone());
    truth.order = order;
    let data = visibility_curve(&truth, &currents(&truth, c, 30.0, 20)).unwrap();
    let mut model = pumped_li7(BeamSpec::new(U, 8.5), source);
    model.order = order;
    let problem = FitProblem::new(
        data,
        model,
        vec![
            ParameterSpec::free(FitParameter::Coupling, c, 0.0, 100.0 * c),
            ParameterSpec::free(FitParameter::SpeedRatio, 8.5, 1.5, MAX_SPEED_RATIO),
        ],
    );
    fit_visibility(&problem).unwrap().get(FitParameter::SpeedRatio).unwrap().value
}

#[test]
fn velocity_selection_raises_effective_speed_ratio() {
    let broad = effective_s(1, 4.0);
    let narrow = effective_s(2, 15.0);
    assert!(narrow > broad, "p=2 narrow {narrow} vs p=1 broad {broad}");
}

#[test]
fn unweighted_fit_scales_covariance() {
    let c = reduce_to_coupling(&ExperimentGeometry::default()).unwrap().0;
    let model = pumped_li7(BeamSpec::new(U, 9.0), PhaseSource::Coupling(CouplingConstant(c)));
    let noisy = add_visibility_noise(&visibility_curve(&model, &currents(&model, c, 27.0, 20)).unwrap(), 0.02, 3).unwrap();
    let bare: Vec<VisibilityPoint> = noisy
        .iter()
        .map(|p| VisibilityPoint {
            sigma_v_r: None,
            ..*p
        })
        .collect();
    let params = vec![
        ParameterSpec::free(FitParameter::Coupling, c, 0.0, 100.0 * c),
        ParameterSpec::free(FitParameter::SpeedRatio, 8.5, 1.5, MAX_SPEED_RATIO),
    ];
    let weighted = fit_visibility(&FitProblem::new(noisy, model.clone(), params.clone())).unwrap();
    let unweighted = fit_visibility(&FitProblem::new(bare, model, params)).unwrap();
    assert!(weighted.weighted && !unweighted.weighted);
    let sw = weighted.get(FitParameter::SpeedRatio).unwrap();
    let su = unweighted.get(FitParameter::SpeedRatio).unwrap();
    assert!((sw.value - su.value).abs() < 1e-5 * sw.value);
    // sigma = 0.02 for all points, so the rescaled error matches within the scatter of chi2_red
    let ratio = su.std_error.unwrap() / sw.std_error.unwrap();
    assert!((ratio - weighted.chi2_reduced.sqrt()).abs() < 1e-4, "ratio {ratio}");
}
