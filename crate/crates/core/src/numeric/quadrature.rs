//! Adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The error estimate is the raw `|K15 - G7|` difference with no QUADPACK
//! rescaling, so reported errors are conservative. Intervals are refined
//! greedily, always bisecting the one with the largest error estimate.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    /// Target for the summed absolute error estimate.
    pub abs_tol: f64,
    /// Relative target, applied to the running integral magnitude.
    pub rel_tol: f64,
    /// Maximum number of bisections over the whole integration.
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-12, rel_tol: 1e-12, max_subdivisions: 2_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl Integral {
    pub const ZERO: Integral = Integral { value: 0.0, error: 0.0, evaluations: 0 };

    fn add(self, other: Integral) -> Integral {
        Integral {
            value: self.value + other.value,
            error: self.error + other.error,
            evaluations: self.evaluations + other.evaluations,
        }
    }
}

/// Single 15-point Kronrod application on `[a, b]`.
pub fn gauss_kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kronrod * half;
    let err = ((kronrod - gauss) * half).abs();
    (value, err)
}

#[derive(Debug)]
struct Piece {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integration of `f` over the finite interval `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, opts: &QuadOptions) -> Integral {
    if !(b > a) {
        return Integral::ZERO;
    }
    let (value, error) = gauss_kronrod15(&mut f, a, b);
    let mut evaluations = 15;
    if !value.is_finite() {
        return Integral { value, error: f64::INFINITY, evaluations };
    }
    let mut heap = BinaryHeap::new();
    heap.push(Piece { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut splits = 0;
    while total_err > opts.abs_tol.max(opts.rel_tol * total.abs()) && splits < opts.max_subdivisions {
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval no longer splittable in floating point.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod15(&mut f, worst.a, mid);
        let (v2, e2) = gauss_kronrod15(&mut f, mid, worst.b);
        evaluations += 30;
        splits += 1;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Piece { a: worst.a, b: mid, value: v1, error: e1 });
        heap.push(Piece { a: mid, b: worst.b, value: v2, error: e2 });
    }
    // Re-sum from the pieces so that cancellation in the running totals does not leak.
    let mut value = 0.0;
    let mut error = 0.0;
    for p in heap.iter() {
        value += p.value;
        error += p.error;
    }
    Integral { value, error, evaluations }
}

/// Integrates over `[a, b]`, splitting first at every knot strictly inside the interval.
///
/// Each sub-interval receives the full tolerance; the returned error is the sum.
pub fn integrate_piecewise<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    knots: &[f64],
    opts: &QuadOptions,
) -> Integral {
    if !(b > a) {
        return Integral::ZERO;
    }
    let mut points: Vec<f64> = knots.iter().copied().filter(|k| *k > a && *k < b).collect();
    points.sort_by(f64::total_cmp);
    points.dedup();
    let mut acc = Integral::ZERO;
    let mut left = a;
    for right in points.into_iter().chain(std::iter::once(b)) {
        acc = acc.add(integrate(&mut f, left, right, opts));
        left = right;
    }
    acc
}
