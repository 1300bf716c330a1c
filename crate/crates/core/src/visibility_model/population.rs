use crate::atomic_levels::{IsotopeSpec, Sublevel};
use crate::error::{Error, Result};
use crate::halfint::HalfInt;

/// Occupation probabilities `P(F, M_F)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SublevelPopulation {
    entries: Vec<(Sublevel, f64)>,
}

impl SublevelPopulation {
    pub const SUM_TOLERANCE: f64 = 1e-12;

    pub fn new(entries: Vec<(Sublevel, f64)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::domain("population has no sublevels"));
        }
        if let Some((s, w)) = entries.iter().find(|(_, w)| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::domain(format!("population weight {w} of {s} is not a nonnegative number")));
        }
        let sum: f64 = entries.iter().map(|(_, w)| w).sum();
        if (sum - 1.0).abs() > Self::SUM_TOLERANCE {
            return Err(Error::domain(format!("population weights sum to {sum}, not 1")));
        }
        Ok(SublevelPopulation { entries })
    }

    /// Equal weight on every listed sublevel.
    pub fn uniform(levels: Vec<Sublevel>) -> Result<Self> {
        let w = 1.0 / levels.len().max(1) as f64;
        Self::new(levels.into_iter().map(|s| (s, w)).collect())
    }

    /// All ground sublevels equally populated.
    pub fn unpumped(iso: &IsotopeSpec) -> Self {
        Self::uniform(iso.sublevels()).expect("isotope has sublevels")
    }

    /// Optically pumped into hyperfine level `f`, its sublevels equally populated.
    pub fn pumped(iso: &IsotopeSpec, f: HalfInt) -> Result<Self> {
        Self::uniform(iso.level(f)?)
    }

    pub fn single(s: Sublevel) -> Self {
        SublevelPopulation { entries: vec![(s, 1.0)] }
    }

    pub fn entries(&self) -> &[(Sublevel, f64)] {
        &self.entries
    }

    /// Checks every sublevel exists in `iso`.
    pub fn validate_for(&self, iso: &IsotopeSpec) -> Result<()> {
        for (s, _) in &self.entries {
            if !iso.has_level(s.f) || s.m_f.abs() > s.f {
                return Err(Error::domain(format!("{} has no sublevel {s}", iso.name)));
            }
        }
        Ok(())
    }

    /// True when `P(F, M_F) = P(F, -M_F)` for every entry.
    pub fn is_mirror_symmetric(&self) -> bool {
        self.entries.iter().all(|(s, w)| {
            let mirror = self
                .entries
                .iter()
                .filter(|(t, _)| t.f == s.f && t.m_f == -s.m_f)
                .map(|(_, w)| *w)
                .sum::<f64>();
            (mirror - w).abs() <= Self::SUM_TOLERANCE
        })
    }
}

/// Named population presets.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PopulationPreset {
    Unpumped,
    /// All population in one hyperfine level.
    Pumped(HalfInt),
}

impl PopulationPreset {
    pub fn build(self, iso: &IsotopeSpec) -> Result<SublevelPopulation> {
        match self {
            PopulationPreset::Unpumped => Ok(SublevelPopulation::unpumped(iso)),
            PopulationPreset::Pumped(f) => SublevelPopulation::pumped(iso, f),
        }
    }
}

impl std::str::FromStr for PopulationPreset {
    type Err = Error;

    /// `unpumped`, `pumped_F1`, `pumped_F3/2`, ...
    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        if t.eq_ignore_ascii_case("unpumped") {
            return Ok(PopulationPreset::Unpumped);
        }
        let lower = t.to_ascii_lowercase();
        if let Some(f) = lower.strip_prefix("pumped_f").or_else(|| lower.strip_prefix("pumped-f")) {
            return Ok(PopulationPreset::Pumped(f.parse()?));
        }
        Err(Error::domain(format!("unknown population preset `{t}`")))
    }
}

impl std::fmt::Display for PopulationPreset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PopulationPreset::Unpumped => f.write_str("unpumped"),
            PopulationPreset::Pumped(level) => write!(f, "pumped_F{level}"),
        }
    }
}
