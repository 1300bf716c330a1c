//! Globally adaptive 21-point Gauss–Kronrod quadrature.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Values that can be integrated: real or complex scalars.
pub trait QuadValue: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {
    fn zero() -> Self;
    fn norm(&self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn norm(&self) -> f64 {
        Complex64::norm(*self)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub const fn new(abs: f64, rel: f64) -> Self {
        Tolerance {
            abs,
            rel,
            max_intervals: 4000,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::new(0.0, 1e-10)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    pub intervals: usize,
}

// Kronrod abscissae; odd indices are the 10-point Gauss nodes.
const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_22,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_725,
    0.054_755_896_574_351_995,
    0.075_039_674_810_919_96,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_84,
    0.134_709_217_311_473_34,
    0.142_775_938_577_060_09,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl<T> Eq for Segment<T> {}
impl<T> PartialOrd for Segment<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Segment<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

/// One 21-point Kronrod evaluation with the QUADPACK error heuristic.
fn gk21<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = T::zero();
    let mut fv1 = [T::zero(); 10];
    let mut fv2 = [T::zero(); 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod = kronrod + (f1 + f2) * WGK[j];
        if j % 2 == 1 {
            gauss = gauss + (f1 + f2) * WG[j / 2];
        }
    }
    let mean = kronrod * 0.5;
    let mut resasc = WGK[10] * (fc - mean).norm();
    let mut resabs = WGK[10] * fc.norm();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).norm() + (fv2[j] - mean).norm());
        resabs += WGK[j] * (fv1[j].norm() + fv2[j].norm());
    }
    let hl = half.abs();
    resasc *= hl;
    resabs *= hl;
    let mut err = ((kronrod - gauss) * half).norm();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (kronrod * half, err)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    tol: Tolerance,
) -> Result<QuadResult<T>> {
    integrate_with_breaks(f, &[a, b], tol)
}

/// Integrates over `[breaks[0], breaks[last]]`, seeding the adaptive partition with
/// the given interior break points (kinks, peaks).
pub fn integrate_with_breaks<T: QuadValue, F: FnMut(f64) -> T>(
    mut f: F,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<QuadResult<T>> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::domain("quadrature break points must be ascending"));
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in breaks.windows(2) {
        if w[1] > w[0] {
            let (value, error) = gk21(&mut f, w[0], w[1]);
            evaluations += 21;
            heap.push(Segment {
                a: w[0],
                b: w[1],
                value,
                error,
            });
        }
    }
    let totals = |heap: &BinaryHeap<Segment<T>>| {
        heap.iter()
            .fold((T::zero(), 0.0), |(v, e), s| (v + s.value, e + s.error))
    };
    loop {
        let (value, error) = totals(&heap);
        let target = tol.abs.max(tol.rel * value.norm());
        if error <= target {
            return Ok(QuadResult {
                value,
                error,
                evaluations,
                intervals: heap.len(),
            });
        }
        let worst = match heap.pop() {
            Some(s) => s,
            None => {
                return Ok(QuadResult {
                    value,
                    error,
                    evaluations,
                    intervals: 0,
                })
            }
        };
        let mid = 0.5 * (worst.a + worst.b);
        if heap.len() + 2 > tol.max_intervals || !(mid > worst.a && mid < worst.b) {
            return Err(Error::Quadrature {
                error,
                target,
                intervals: heap.len() + 1,
            });
        }
        for (a, b) in [(worst.a, mid), (mid, worst.b)] {
            let (value, error) = gk21(&mut f, a, b);
            evaluations += 21;
            heap.push(Segment { a, b, value, error });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_to_two() {
        let k: f64 = WGK[10] + 2.0 * WGK[..10].iter().sum::<f64>();
        let g: f64 = 2.0 * WG.iter().sum::<f64>();
        assert!((k - 2.0).abs() < 1e-15);
        assert!((g - 2.0).abs() < 1e-15);
    }

    #[test]
    fn rules_are_exact_for_polynomials() {
        // Kronrod degree 31, Gauss degree 19, on [-1, 1].
        for deg in 0..=30 {
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            // powi(0) of 0.0 is 1, so the center node counts for deg 0 only
            let mut kron = WGK[10] * 0f64.powi(deg);
            let mut gauss = 0.0;
            for j in 0..10 {
                let x = XGK[j];
                let fx = x.powi(deg) + (-x).powi(deg);
                kron += WGK[j] * fx;
                if j % 2 == 1 {
                    gauss += WG[j / 2] * fx;
                }
            }
            assert!((kron - exact).abs() < 1e-14, "kronrod deg {deg}: {kron} vs {exact}");
            if deg <= 19 {
                assert!((gauss - exact).abs() < 1e-14, "gauss deg {deg}: {gauss} vs {exact}");
            }
        }
    }

    #[test]
    fn adaptive_handles_peaks_and_oscillation() {
        let r = integrate(|x: f64| 1.0 / (1e-4 + x * x), -1.0, 1.0, Tolerance::new(0.0, 1e-12)).unwrap();
        let exact = 2.0 / 1e-2 * (1.0f64 / 1e-2).atan();
        assert!((r.value - exact).abs() < 1e-10 * exact);

        let r = integrate(|x: f64| Complex64::new(0.0, 200.0 * x).exp(), 0.0, 1.0, Tolerance::new(1e-13, 1e-12)).unwrap();
        let exact = (Complex64::new(0.0, 200.0).exp() - 1.0) / Complex64::new(0.0, 200.0);
        assert!((r.value - exact).norm() < 1e-11);
    }

    #[test]
    fn breaks_resolve_kinks() {
        let r = integrate_with_breaks(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], Tolerance::new(0.0, 1e-12)).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-13);
        assert!(integrate_with_breaks(|x: f64| x, &[1.0, 0.0], Tolerance::default()).is_err());
    }

    #[test]
    fn zero_integrand_converges_immediately() {
        let r = integrate(|_| 0.0, 0.0, 1.0, Tolerance::new(0.0, 1e-8)).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn exhausting_intervals_is_an_error() {
        let tol = Tolerance { abs: 0.0, rel: 1e-15, max_intervals: 4 };
        assert!(integrate(|x: f64| x.sqrt().sin() / x.sqrt(), 0.0, 100.0, tol).is_err());
    }
}
