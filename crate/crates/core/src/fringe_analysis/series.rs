use std::f64::consts::PI;

use super::{wrap_phase, FringeFit};
use crate::error::{Error, Result};
use crate::visibility_model::VisibilityPoint;

/// A fitted scan with the time it was recorded and the coil current.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesEntry {
    pub timestamp_s: f64,
    pub current_a: f64,
    pub fit: FringeFit,
}

/// Drift-corrected relative visibility and phase of each scan.
///
/// References are interpolated linearly in time between the two that bracket each scan. Scans
/// outside the reference span are an error unless `allow_extrapolation` is set. Phases of the
/// returned series are unwrapped by nearest-branch continuation in input order.
pub fn relative_series(
    scans: &[SeriesEntry],
    references: &[SeriesEntry],
    allow_extrapolation: bool,
) -> Result<Vec<VisibilityPoint>> {
    if references.is_empty() {
        return Err(Error::DataQuality("no zero-current reference scans".into()));
    }
    if references.windows(2).any(|w| !(w[1].timestamp_s > w[0].timestamp_s)) {
        return Err(Error::DataQuality("reference timestamps must increase strictly".into()));
    }
    let first = references[0].timestamp_s;
    let last = references[references.len() - 1].timestamp_s;
    let mut out = Vec::with_capacity(scans.len());
    for scan in scans {
        let t = scan.timestamp_s;
        if (t < first || t > last) && !allow_extrapolation {
            return Err(Error::Extrapolation {
                time_s: t,
                first_s: first,
                last_s: last,
            });
        }
        let (r1, r2, w) = bracket(references, t);
        let v1 = r1.fit.visibility;
        let v2 = r2.fit.visibility;
        let v_ref = v1 + w * (v2 - v1);
        // continue the second reference phase onto the branch of the first
        let p1 = r1.fit.phase_rad;
        let p2 = p1 + wrap_phase(r2.fit.phase_rad - p1);
        let phi_ref = p1 + w * (p2 - p1);
        let var_v_ref = ((1.0 - w) * r1.fit.sigma_visibility).powi(2) + (w * r2.fit.sigma_visibility).powi(2);
        let var_phi_ref = ((1.0 - w) * r1.fit.sigma_phase_rad).powi(2) + (w * r2.fit.sigma_phase_rad).powi(2);
        if !(v_ref > 0.0) {
            return Err(Error::DataQuality(format!("reference visibility at t = {t} s is not positive")));
        }
        let v = scan.fit.visibility;
        let v_r = v / v_ref;
        let sigma_v_r = ((scan.fit.sigma_visibility / v_ref).powi(2) + (v * var_v_ref.sqrt() / (v_ref * v_ref)).powi(2)).sqrt();
        let sigma_phase = (scan.fit.sigma_phase_rad.powi(2) + var_phi_ref).sqrt();
        out.push(VisibilityPoint {
            current_a: scan.current_a,
            v_r,
            phase_rad: wrap_phase(scan.fit.phase_rad - phi_ref),
            sigma_v_r: Some(sigma_v_r),
            sigma_phase_rad: Some(sigma_phase),
        });
    }
    unwrap_phases(&mut out);
    Ok(out)
}

/// References bracketing `t` and the interpolation weight of the later one.
fn bracket(refs: &[SeriesEntry], t: f64) -> (&SeriesEntry, &SeriesEntry, f64) {
    if refs.len() == 1 {
        return (&refs[0], &refs[0], 0.0);
    }
    let upper = refs.partition_point(|r| r.timestamp_s < t).clamp(1, refs.len() - 1);
    let (r1, r2) = (&refs[upper - 1], &refs[upper]);
    if t == r1.timestamp_s {
        return (r1, r1, 0.0);
    }
    if t == r2.timestamp_s {
        return (r2, r2, 0.0);
    }
    (r1, r2, (t - r1.timestamp_s) / (r2.timestamp_s - r1.timestamp_s))
}

/// Nearest-branch continuation: each phase is shifted by a multiple of `2 pi` to lie within `pi`
/// of the previous one.
pub fn unwrap_phases(points: &mut [VisibilityPoint]) {
    for i in 1..points.len() {
        let prev = points[i - 1].phase_rad;
        let d = points[i].phase_rad - prev;
        points[i].phase_rad -= 2.0 * PI * (d / (2.0 * PI)).round();
    }
}
