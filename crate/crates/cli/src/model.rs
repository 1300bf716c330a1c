//! Builds library objects from resolved configuration keys.

use gradphase::atomic_levels::{IsotopeSpec, ZeemanMode};
use gradphase::field_geometry::{reduce_to_coupling, CoilSpec, CouplingConstant, ExperimentGeometry, InterferometerGeometry};
use gradphase::io::read_population_csv;
use gradphase::visibility_model::{
    BeamSpec, IsotopeComponent, ModelConfig, PhaseSource, PopulationPreset, SublevelPopulation, Transmission,
    VELOCITY_TOLERANCE,
};
use gradphase::{Error, Result};

use crate::run::Run;

/// Every key any subcommand reads; anything else in a config file is reported as unknown.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "isotope",
    "population",
    "population.file",
    "mix.primary",
    "mix.contaminant",
    "mix.fraction",
    "mix.contaminant_population",
    "mode",
    "order",
    "coupling",
    "beam.u_m_per_s",
    "beam.s_par",
    "beam.v_cubed",
    "beam.transmission_center_m_per_s",
    "beam.transmission_s",
    "coil.radius_m",
    "coil.turns",
    "coil.center_offset_x_m",
    "coil.axial_position_m",
    "coil.axis",
    "interferometer.gratings_z_m",
    "interferometer.wavelength_m",
    "ambient.field_t",
    "currents.list",
    "currents.start_a",
    "currents.stop_a",
    "currents.count",
    "noise.sigma_v_r",
    "field.export",
    "field.current_a",
    "field.samples",
    "field.velocity_m_per_s",
    "fit.data",
    "fit.free",
    "fit.coupling.initial",
    "fit.coupling.lower",
    "fit.coupling.upper",
    "fit.speed_ratio.initial",
    "fit.speed_ratio.lower",
    "fit.speed_ratio.upper",
    "fit.contamination.initial",
    "fit.contamination.lower",
    "fit.contamination.upper",
    "fit.coil_offset_m.initial",
    "fit.coil_offset_m.lower",
    "fit.coil_offset_m.upper",
    "fit.max_iterations",
    "fit.step_tol",
    "fit.central_differences",
    "fit.profile",
    "fit.profile.points",
    "fit.profile.width",
    "fringes.manifest",
    "fringes.dwell_s",
    "fringes.background_cps",
    "fringes.background_sigma_cps",
    "fringes.fit_background",
    "fringes.reject_outliers",
    "fringes.outlier_sigma",
    "fringes.allow_extrapolation",
];

fn isotope(run: &Run, key: &str, default: &str) -> Result<IsotopeSpec> {
    let name: String = run.get_or(key, default.to_string())?;
    IsotopeSpec::preset(&name).map_err(|e| Error::config(key, e.to_string()))
}

fn population(run: &Run, key: &str, iso: &IsotopeSpec) -> Result<SublevelPopulation> {
    let preset: String = run.get_or(key, "unpumped".to_string())?;
    if preset == "file" {
        let path = run.require_path("population.file")?;
        let pop = read_population_csv(&path)?;
        pop.validate_for(iso).map_err(|e| Error::config("population.file", e.to_string()))?;
        return Ok(pop);
    }
    let preset: PopulationPreset = preset.parse().map_err(|e: Error| Error::config(key, e.to_string()))?;
    preset.build(iso).map_err(|e| Error::config(key, e.to_string()))
}

/// Isotope components: `isotope = li6 | li7 | mix`.
pub fn components(run: &Run) -> Result<Vec<IsotopeComponent>> {
    let kind: String = run.get_or("isotope", "li7".to_string())?;
    match kind.as_str() {
        "li6" | "li7" => {
            let iso = IsotopeSpec::preset(&kind).map_err(|e| Error::config("isotope", e.to_string()))?;
            let population = population(run, "population", &iso)?;
            Ok(vec![IsotopeComponent {
                isotope: iso,
                population,
                weight: 1.0,
            }])
        }
        "mix" => {
            let primary = isotope(run, "mix.primary", "li6")?;
            let contaminant = isotope(run, "mix.contaminant", "li7")?;
            let f: f64 = run.get_or("mix.fraction", 0.08)?;
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::config("mix.fraction", format!("{f} is outside [0, 1]")));
            }
            let p1 = population(run, "population", &primary)?;
            let p2 = population(run, "mix.contaminant_population", &contaminant)?;
            Ok(vec![
                IsotopeComponent {
                    isotope: primary,
                    population: p1,
                    weight: 1.0 - f,
                },
                IsotopeComponent {
                    isotope: contaminant,
                    population: p2,
                    weight: f,
                },
            ])
        }
        other => Err(Error::config("isotope", format!("expected li6, li7 or mix, got `{other}`"))),
    }
}

pub fn beam(run: &Run) -> Result<BeamSpec> {
    let mut beam = BeamSpec::new(run.get_or("beam.u_m_per_s", 1065.0)?, run.get_or("beam.s_par", 8.5)?);
    beam.v_cubed = run.get_or("beam.v_cubed", false)?;
    let center: Option<f64> = run.get("beam.transmission_center_m_per_s")?;
    let s: Option<f64> = run.get("beam.transmission_s")?;
    beam.transmission = match (center, s) {
        (Some(c), Some(s)) => Some(Transmission { center_m_per_s: c, s }),
        (None, None) => None,
        (Some(_), None) => return Err(Error::config("beam.transmission_s", "required when a transmission center is set")),
        (None, Some(_)) => {
            return Err(Error::config("beam.transmission_center_m_per_s", "required when a transmission width is set"))
        }
    };
    beam.validate().map_err(|e| Error::config("beam", e.to_string()))?;
    Ok(beam)
}

pub fn geometry(run: &Run, order: u32) -> Result<ExperimentGeometry> {
    let dc = CoilSpec::default();
    let di = InterferometerGeometry::default();
    let coil = CoilSpec {
        radius_m: run.get_or("coil.radius_m", dc.radius_m)?,
        turns: run.get_or("coil.turns", dc.turns)?,
        center_offset_x_m: run.get_or("coil.center_offset_x_m", dc.center_offset_x_m)?,
        axial_position_m: run.get_or("coil.axial_position_m", dc.axial_position_m)?,
        axis: run.vec3_or("coil.axis", dc.axis)?,
    };
    coil.validate().map_err(|e| Error::config("coil", e.to_string()))?;
    let interferometer = InterferometerGeometry {
        gratings_z_m: run.vec3_or("interferometer.gratings_z_m", di.gratings_z_m)?,
        wavelength_m: run.get_or("interferometer.wavelength_m", di.wavelength_m)?,
        order,
    };
    interferometer
        .validate()
        .map_err(|e| Error::config("interferometer", e.to_string()))?;
    Ok(ExperimentGeometry {
        coil,
        interferometer,
        ambient_field_t: run.vec3_or("ambient.field_t", [0.0; 3])?,
    })
}

pub fn mode(run: &Run) -> Result<ZeemanMode> {
    run.get_or("mode", ZeemanMode::Linear)
}

pub fn order(run: &Run) -> Result<u32> {
    let p: u32 = run.get_or("order", 1)?;
    if p == 0 {
        return Err(Error::config("order", "diffraction order must be at least 1"));
    }
    Ok(p)
}

/// Full model. The phase source is the `coupling` key when given, else the coil geometry.
pub fn model(run: &Run) -> Result<ModelConfig> {
    let order = order(run)?;
    let mode = mode(run)?;
    let geometry = geometry(run, order)?;
    let source = match run.get::<f64>("coupling")? {
        Some(c) => PhaseSource::Coupling(CouplingConstant(c)),
        None => PhaseSource::Geometry(geometry),
    };
    let m = ModelConfig {
        components: components(run)?,
        beam: beam(run)?,
        order,
        mode,
        source,
        tolerance: VELOCITY_TOLERANCE,
    };
    m.validate().map_err(|e| Error::config("mode", e.to_string()))?;
    Ok(m)
}

/// Coupling constant of the configured model: the `coupling` key or the geometry's value.
pub fn nominal_coupling(model: &ModelConfig) -> Result<f64> {
    match &model.source {
        PhaseSource::Coupling(c) => Ok(c.0),
        PhaseSource::Geometry(g) => Ok(reduce_to_coupling(g)?.0),
    }
}

/// `currents.list`, or an even grid from `currents.start_a` to `currents.stop_a`.
pub fn currents(run: &Run) -> Result<Vec<f64>> {
    let list = match run.list::<f64>("currents.list")? {
        Some(l) => l,
        None => {
            let start: f64 = run.get_or("currents.start_a", 0.0)?;
            let stop: f64 = run.get_or("currents.stop_a", 10.0)?;
            let n: usize = run.get_or("currents.count", 101)?;
            match n {
                0 => return Err(Error::config("currents.count", "must be at least 1")),
                1 => vec![start],
                _ => (0..n)
                    .map(|i| if i + 1 == n { stop } else { start + (stop - start) * i as f64 / (n - 1) as f64 })
                    .collect(),
            }
        }
    };
    if list.iter().any(|i| !(i.is_finite() && *i >= 0.0)) {
        return Err(Error::config("currents", "currents must be finite and nonnegative"));
    }
    if list.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("currents", "currents must be ascending"));
    }
    Ok(list)
}
