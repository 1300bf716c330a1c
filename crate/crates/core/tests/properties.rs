use std::f64::consts::PI;

use nalgebra::Vector3;
use num_complex::Complex64;
use proptest::prelude::*;

use gradphase::atomic_levels::{
    hyperfine_offset, lande_g, zeeman_energy_breit_rabi, zeeman_energy_linear, IsotopeSpec, Sublevel, ZeemanMode,
};
use gradphase::field_geometry::{loop_field, phase_integral, CouplingConstant, CurrentLoop, ExperimentGeometry};
use gradphase::fringe_analysis::{
    expected_counts, fit_fringe, relative_series, synthesize_scan, wrap_phase, FringeTruth, ScanLayout, SeriesEntry,
};
use gradphase::visibility_model::{
    visibility_curve, BeamSpec, ModelConfig, PhaseSource, SublevelPopulation, VelocityDistribution,
};
use gradphase::HalfInt;

const U: f64 = 1065.0;

fn isotope(li7: bool) -> IsotopeSpec {
    if li7 {
        IsotopeSpec::li7()
    } else {
        IsotopeSpec::li6()
    }
}

/// Unit coupling: the g_F M_F = 1 phase at the most probable velocity equals the current.
fn unit_coupling(iso: &IsotopeSpec) -> PhaseSource {
    PhaseSource::Coupling(CouplingConstant(iso.mass_kg * U * U))
}

/// Population from raw nonnegative weights, one per sublevel.
fn population(iso: &IsotopeSpec, raw: &[f64]) -> SublevelPopulation {
    let subs = iso.sublevels();
    let total: f64 = subs.iter().zip(raw).map(|(_, w)| w).sum();
    SublevelPopulation::new(subs.iter().zip(raw).map(|(s, w)| (*s, w / total)).collect()).unwrap()
}

/// Population with equal weight on `M_F` and `-M_F` within each level.
fn mirrored(iso: &IsotopeSpec, raw: &[f64]) -> SublevelPopulation {
    let subs = iso.sublevels();
    let weight = |s: &Sublevel| {
        let partner = subs.iter().position(|t| t.f == s.f && t.m_f == -s.m_f).unwrap();
        let own = subs.iter().position(|t| t == s).unwrap();
        raw[own] + raw[partner]
    };
    let total: f64 = subs.iter().map(weight).sum();
    SublevelPopulation::new(subs.iter().map(|s| (*s, weight(s) / total)).collect()).unwrap()
}

fn beam(s_par: f64, transmission: Option<f64>) -> BeamSpec {
    match transmission {
        Some(t) => BeamSpec::new(U, s_par).with_transmission(U * 1.02, t),
        None => BeamSpec::new(U, s_par),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn visibility_is_bounded_and_unity_at_zero(
        li7 in any::<bool>(),
        raw in prop::collection::vec(0.01f64..1.0, 8),
        s_par in 2.0f64..30.0,
        transmission in prop::option::of(3.0f64..20.0),
        order in 1u32..=3,
        currents in prop::collection::vec(0.0f64..30.0, 1..6),
    ) {
        let iso = isotope(li7);
        let mut model = ModelConfig::single(iso.clone(), population(&iso, &raw), beam(s_par, transmission), unit_coupling(&iso));
        model.order = order;
        let mut grid = vec![0.0];
        grid.extend(currents);
        let curve = visibility_curve(&model, &grid).unwrap();
        prop_assert_eq!((curve[0].v_r, curve[0].phase_rad), (1.0, 0.0));
        for p in &curve {
            prop_assert!((0.0..=1.0).contains(&p.v_r), "V_r = {}", p.v_r);
        }
    }

    #[test]
    fn mirrored_populations_give_real_even_phasors(
        li7 in any::<bool>(),
        raw in prop::collection::vec(0.01f64..1.0, 8),
        s_par in 2.0f64..30.0,
        current in 0.01f64..30.0,
    ) {
        let iso = isotope(li7);
        let model = ModelConfig::single(iso.clone(), mirrored(&iso, &raw), beam(s_par, None), unit_coupling(&iso));
        let curve = visibility_curve(&model, &[current, -current]).unwrap();
        // the phase of a real phasor is 0, or pi where it has turned negative
        prop_assert!(curve[0].phase_rad == 0.0 || curve[0].phase_rad == PI, "phase {}", curve[0].phase_rad);
        prop_assert_eq!(curve[0].v_r, curve[1].v_r);
    }

    #[test]
    fn pumped_level_tends_to_one_third(s_par in 4.0f64..30.0, excess in 1.0f64..3.0) {
        let li7 = IsotopeSpec::li7();
        let pumped = SublevelPopulation::pumped(&li7, HalfInt::from_int(1)).unwrap();
        let model = ModelConfig::single(li7.clone(), pumped, beam(s_par, None), unit_coupling(&li7));
        // g_F M_F = +-1/2 in F = 1, so the M_F = +-1 phase at u is half the current
        let current = 2.0 * 5.0 * s_par * excess;
        let v = visibility_curve(&model, &[current]).unwrap()[0].v_r;
        prop_assert!((v - 1.0 / 3.0).abs() <= 0.01, "V_r = {v}");
    }

    #[test]
    fn linear_phase_is_odd_in_m_and_linear_in_current(
        li7 in any::<bool>(),
        index in 0usize..8,
        v in 600.0f64..1600.0,
        current in 0.1f64..10.0,
        scale in 0.1f64..5.0,
    ) {
        let iso = isotope(li7);
        let subs = iso.sublevels();
        let s = subs[index % subs.len()];
        let flipped = Sublevel::new(s.f, -s.m_f).unwrap();
        let geom = ExperimentGeometry::default();
        let phase = |s: &Sublevel, i: f64| phase_integral(&geom, &iso, s, v, i, ZeemanMode::Linear).unwrap();
        let a = phase(&s, current);
        prop_assert_eq!(a, -phase(&flipped, current));
        // linear up to rounding in the field gradient
        prop_assert!((phase(&s, scale * current) - scale * a).abs() <= 1e-11 * (scale * a).abs());
    }

    #[test]
    fn breit_rabi_energies_sum_to_zero(li7 in any::<bool>(), b in 0.0f64..1e-2, g_i in -2e-3f64..2e-3) {
        let mut iso = isotope(li7);
        iso.g_i = g_i;
        let sum: f64 = iso.sublevels().iter().map(|s| zeeman_energy_breit_rabi(&iso, s, b).unwrap()).sum();
        prop_assert!(sum.abs() <= 1e-12 * iso.hfs_splitting_j, "sum {sum:e}");
    }

    #[test]
    fn breit_rabi_departs_quadratically_from_linear(li7 in any::<bool>(), index in 0usize..8, b in 1e-7f64..1e-5) {
        let iso = isotope(li7);
        let subs = iso.sublevels();
        let s = subs[index % subs.len()];
        let deviation = |b: f64| {
            zeeman_energy_breit_rabi(&iso, &s, b).unwrap()
                - hyperfine_offset(&iso, s.f).unwrap()
                - zeeman_energy_linear(&iso, &s, b).unwrap()
        };
        let floor = 1e-15 * iso.hfs_splitting_j;
        prop_assert!(deviation(0.0).abs() <= floor);
        // curvature fitted over the small-field window
        let k = (1..=20).map(|i| deviation(5e-7 * f64::from(i)).abs() / (5e-7 * f64::from(i)).powi(2)).fold(0.0, f64::max);
        prop_assert!(deviation(b).abs() <= 1.01 * k * b * b + floor);
    }

    #[test]
    fn loop_field_is_divergence_free(
        radius in 0.005f64..0.05,
        turns in 1u32..20,
        ax in -1.0f64..1.0, ay in -1.0f64..1.0, az in 0.1f64..1.0,
        px in -0.1f64..0.1, py in -0.1f64..0.1, pz in -0.1f64..0.1,
    ) {
        let coil = CurrentLoop { center: Vector3::zeros(), axis: Vector3::new(ax, ay, az).normalize(), radius_m: radius, turns };
        let p = Vector3::new(px, py, pz);
        let along = p.dot(&coil.axis);
        let radial = (p - along * coil.axis).norm();
        prop_assume!(along.hypot(radial - radius) > 0.1 * radius && radial > 1e-3 * radius);
        let h = 1e-6 * radius;
        let b = loop_field(&coil, 3.0, p).unwrap();
        let div: f64 = (0..3)
            .map(|i| {
                let mut e = Vector3::zeros();
                e[i] = h;
                (loop_field(&coil, 3.0, p + e).unwrap()[i] - loop_field(&coil, 3.0, p - e).unwrap()[i]) / (2.0 * h)
            })
            .sum();
        prop_assert!(div.abs() <= 1e-6 * b.norm() / h, "div {div:e} vs |B|/h {:e}", b.norm() / h);
    }

    #[test]
    fn fringe_fit_is_shift_equivariant(
        visibility in 0.05f64..0.95,
        phase in -PI..PI,
        shift_periods in -3.0f64..3.0,
        order in 1u32..=2,
        seed in any::<u64>(),
    ) {
        let k_l = 2.0 * PI / 671e-9;
        let truth = FringeTruth { mean_level_cps: 4000.0, visibility, phase_rad: phase, background_cps: 50.0 };
        let layout = ScanLayout::uniform(40, 2.0, 0.2, order, k_l);
        let scan = synthesize_scan(&truth, &layout, seed).unwrap();
        let delta = shift_periods * scan.period();
        let mut shifted = scan.clone();
        for s in &mut shifted.samples {
            s.x3_m += delta;
        }
        let a = fit_fringe(&scan).unwrap();
        let b = fit_fringe(&shifted).unwrap();
        let expected = wrap_phase(a.phase_rad - 2.0 * f64::from(order) * k_l * delta);
        prop_assert!(wrap_phase(b.phase_rad - expected).abs() <= 1e-9);
        prop_assert!((a.visibility - b.visibility).abs() <= 1e-9 * a.visibility);
        prop_assert!((a.mean_level_cps - b.mean_level_cps).abs() <= 1e-9 * a.mean_level_cps);
        prop_assert!((a.sigma_visibility - b.sigma_visibility).abs() <= 1e-9 * a.sigma_visibility);
        prop_assert!((a.sigma_phase_rad - b.sigma_phase_rad).abs() <= 1e-9 * a.sigma_phase_rad);
    }

    #[test]
    fn scan_relative_to_itself_is_exactly_unity(
        visibility in 0.05f64..0.95,
        phase in -PI..PI,
        timestamp in 0.0f64..1e5,
        seed in any::<u64>(),
    ) {
        let truth = FringeTruth { mean_level_cps: 4000.0, visibility, phase_rad: phase, background_cps: 50.0 };
        let layout = ScanLayout::uniform(40, 2.0, 0.2, 1, 2.0 * PI / 671e-9);
        let fit = fit_fringe(&synthesize_scan(&truth, &layout, seed).unwrap()).unwrap();
        let entry = SeriesEntry { timestamp_s: timestamp, current_a: 0.0, fit };
        let out = relative_series(&[entry], &[entry], false).unwrap();
        prop_assert_eq!((out[0].v_r, out[0].phase_rad), (1.0, 0.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn quadrature_matches_dense_riemann_sum(
        li7 in any::<bool>(),
        raw in prop::collection::vec(0.01f64..1.0, 8),
        s_par in 4.0f64..25.0,
        current in 0.5f64..40.0,
        order in 1u32..=2,
    ) {
        let iso = isotope(li7);
        let pop = population(&iso, &raw);
        let beam = beam(s_par, None);
        let mut model = ModelConfig::single(iso.clone(), pop.clone(), beam, unit_coupling(&iso));
        model.order = order;
        let point = visibility_curve(&model, &[current]).unwrap()[0];
        let z = Complex64::from_polar(point.v_r, point.phase_rad);

        let dist = VelocityDistribution::new(&beam).unwrap();
        let (lo, hi) = dist.support();
        let n = 1_000_000;
        let dv = (hi - lo) / n as f64;
        let terms: Vec<(f64, f64)> = pop
            .entries()
            .iter()
            .map(|(s, w)| (*w, f64::from(order) * lande_g(&iso, s.f).unwrap() * s.m_f.value() * current * U * U))
            .collect();
        let mut oracle = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let v = lo + (i as f64 + 0.5) * dv;
            let pdf = dist.pdf(v);
            for &(w, k) in &terms {
                oracle += Complex64::from_polar(w * pdf, k / (v * v));
            }
        }
        oracle *= dv;
        prop_assert!((z - oracle).norm() <= 1e-6, "quadrature {z} vs Riemann {oracle}");
    }
}

#[test]
fn noiseless_scan_is_recovered() {
    let truth = FringeTruth {
        mean_level_cps: 5000.0,
        visibility: 0.75,
        phase_rad: 1.0,
        background_cps: 100.0,
    };
    let scan = expected_counts(&truth, &ScanLayout::uniform(50, 2.0, 0.1, 1, 2.0 * PI / 671e-9)).unwrap();
    let fit = fit_fringe(&scan).unwrap();
    assert!((fit.visibility - 0.75).abs() < 1e-8 && (fit.phase_rad - 1.0).abs() < 1e-8);
}
