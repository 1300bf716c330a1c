use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};

use super::{FringeSample, FringeScan};
use crate::error::{Error, Result};

/// True fringe parameters used to generate a scan. Rates are in counts/s.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FringeTruth {
    pub mean_level_cps: f64,
    pub visibility: f64,
    pub phase_rad: f64,
    pub background_cps: f64,
}

/// Where and how a scan is recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct ScanLayout {
    pub x3_m: Vec<f64>,
    pub dwell_s: f64,
    pub order: u32,
    pub k_l: f64,
    pub current_a: f64,
    pub timestamp_s: f64,
}

impl ScanLayout {
    /// `n` evenly spaced points covering `periods` fringe periods.
    pub fn uniform(n: usize, periods: f64, dwell_s: f64, order: u32, k_l: f64) -> Self {
        let period = std::f64::consts::PI / (f64::from(order) * k_l);
        let x3_m = (0..n).map(|i| periods * period * i as f64 / n as f64).collect();
        ScanLayout {
            x3_m,
            dwell_s,
            order,
            k_l,
            current_a: 0.0,
            timestamp_s: 0.0,
        }
    }
}

fn check(truth: &FringeTruth) -> Result<()> {
    if !(0.0..=1.0).contains(&truth.visibility) {
        return Err(Error::domain(format!("visibility {} outside [0, 1]", truth.visibility)));
    }
    if !(truth.mean_level_cps >= 0.0 && truth.background_cps >= 0.0) {
        return Err(Error::domain("rates must be nonnegative"));
    }
    Ok(())
}

/// Noiseless scan whose counts equal the model expectation.
pub fn expected_counts(truth: &FringeTruth, layout: &ScanLayout) -> Result<FringeScan> {
    check(truth)?;
    let kx = 2.0 * f64::from(layout.order) * layout.k_l;
    let samples = layout
        .x3_m
        .iter()
        .map(|&x| FringeSample {
            x3_m: x,
            counts: layout.dwell_s
                * (truth.background_cps
                    + truth.mean_level_cps * (1.0 + truth.visibility * (kx * x + truth.phase_rad).cos())),
        })
        .collect();
    Ok(FringeScan {
        samples,
        dwell_s: layout.dwell_s,
        background_cps: truth.background_cps,
        background_sigma_cps: None,
        current_a: layout.current_a,
        order: layout.order,
        k_l: layout.k_l,
        timestamp_s: layout.timestamp_s,
    })
}

/// Poisson-distributed scan; identical seeds give identical scans.
pub fn synthesize_scan(truth: &FringeTruth, layout: &ScanLayout, seed: u64) -> Result<FringeScan> {
    let mut scan = expected_counts(truth, layout)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &mut scan.samples {
        s.counts = if s.counts > 0.0 {
            let d = Poisson::new(s.counts).map_err(|e| Error::domain(e.to_string()))?;
            d.sample(&mut rng).round()
        } else {
            0.0
        };
    }
    Ok(scan)
}
