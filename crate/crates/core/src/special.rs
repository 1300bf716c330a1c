//! Complete elliptic integrals via Carlson's symmetric forms.

/// Carlson's `R_F(x, y, z)`.
pub fn carlson_rf(x: f64, y: f64, z: f64) -> f64 {
    const TOL: f64 = 1e-3;
    let (mut x, mut y, mut z) = (x, y, z);
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = (x + y + z) / 3.0;
        let (dx, dy, dz) = ((mean - x) / mean, (mean - y) / mean, (mean - z) / mean);
        if dx.abs().max(dy.abs()).max(dz.abs()) < TOL {
            let e2 = dx * dy - dz * dz;
            let e3 = dx * dy * dz;
            return (1.0 + (e2 / 24.0 - 0.1 - 3.0 * e3 / 44.0) * e2 + e3 / 14.0) / mean.sqrt();
        }
    }
}

/// Carlson's `R_D(x, y, z)`.
pub fn carlson_rd(x: f64, y: f64, z: f64) -> f64 {
    const TOL: f64 = 1e-3;
    const C1: f64 = 3.0 / 14.0;
    const C2: f64 = 1.0 / 6.0;
    const C3: f64 = 9.0 / 22.0;
    const C4: f64 = 3.0 / 26.0;
    const C5: f64 = 0.25 * C3;
    const C6: f64 = 1.5 * C4;
    let (mut x, mut y, mut z) = (x, y, z);
    let mut sum = 0.0;
    let mut fac = 1.0;
    loop {
        let (sx, sy, sz) = (x.sqrt(), y.sqrt(), z.sqrt());
        let lambda = sx * (sy + sz) + sy * sz;
        sum += fac / (sz * (z + lambda));
        fac *= 0.25;
        x = 0.25 * (x + lambda);
        y = 0.25 * (y + lambda);
        z = 0.25 * (z + lambda);
        let mean = 0.2 * (x + y + 3.0 * z);
        let (dx, dy, dz) = ((mean - x) / mean, (mean - y) / mean, (mean - z) / mean);
        if dx.abs().max(dy.abs()).max(dz.abs()) < TOL {
            let ea = dx * dy;
            let eb = dz * dz;
            let ec = ea - eb;
            let ed = ea - 6.0 * eb;
            let ee = ed + ec + ec;
            let series = 1.0
                + ed * (-C1 + C5 * ed - C6 * dz * ee)
                + dz * (C2 * ee + dz * (-C3 * ec + dz * C4 * ea));
            return 3.0 * sum + fac * series / (mean * mean.sqrt());
        }
    }
}

/// Complete elliptic integrals `(K(m), E(m))` with parameter `m = k^2 < 1`.
pub fn ellip_ke(m: f64) -> (f64, f64) {
    let y = 1.0 - m;
    let k = carlson_rf(0.0, y, 1.0);
    let e = k - m / 3.0 * carlson_rd(0.0, y, 1.0);
    (k, e)
}

/// `(1 - m/2) E(m) - (1 - m) K(m)`, which vanishes like `m^2` for small `m`.
///
/// Below `m = 0.1` the power series is summed directly so the leading cancellation
/// never happens in floating point.
pub fn loop_radial_kernel(m: f64) -> f64 {
    if m >= 0.1 {
        let (k, e) = ellip_ke(m);
        return (1.0 - 0.5 * m) * e - (1.0 - m) * k;
    }
    // K = sum a_n m^n, E = sum a_n m^n / (1 - 2n), a_n = pi/2 ((2n-1)!!/(2n)!!)^2
    let half_pi = std::f64::consts::FRAC_PI_2;
    let mut c = 1.0; // (2n-1)!!/(2n)!!
    let mut a_prev = half_pi;
    let mut e_prev = half_pi;
    let mut mpow = 1.0;
    let mut sum = 0.0;
    for n in 1..200 {
        let nf = n as f64;
        c *= (2.0 * nf - 1.0) / (2.0 * nf);
        let a_n = half_pi * c * c;
        let e_n = a_n / (1.0 - 2.0 * nf);
        mpow *= m;
        if n >= 2 {
            let term = (e_n - 0.5 * e_prev - a_n + a_prev) * mpow;
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
        }
        a_prev = a_n;
        e_prev = e_n;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn known_values() {
        let (k, e) = ellip_ke(0.0);
        assert!((k - FRAC_PI_2).abs() < 1e-15);
        assert!((e - FRAC_PI_2).abs() < 1e-15);
        let (k, e) = ellip_ke(0.5);
        assert!((k - 1.854_074_677_301_372).abs() < 1e-14);
        assert!((e - 1.350_643_881_047_675_5).abs() < 1e-14);
        let (k, e) = ellip_ke(0.9);
        assert!((k - 2.578_092_113_348_173).abs() < 1e-13);
        assert!((e - 1.104_774_732_704_073).abs() < 1e-13);
    }

    #[test]
    fn kernel_series_joins_direct_form() {
        for m in [0.02, 0.05, 0.0999, 0.1, 0.2] {
            let (k, e) = ellip_ke(m);
            let direct = (1.0 - 0.5 * m) * e - (1.0 - m) * k;
            let kern = loop_radial_kernel(m);
            assert!((kern - direct).abs() < 1e-13 * m.max(1e-3), "m={m}: {kern} vs {direct}");
        }
        // leading term 3 pi/32 m^2
        let m = 1e-6;
        let lead = 3.0 * std::f64::consts::PI / 32.0 * m * m;
        assert!((loop_radial_kernel(m) / lead - 1.0).abs() < 1e-5);
    }
}
