//! Globally adaptive Gauss–Kronrod (7/15) quadrature for real and complex
//! integrands.
//!
//! The interval with the largest error estimate is bisected until the summed
//! estimate drops below `max(abs_tol, rel_tol * |I|)` or the subdivision budget
//! is exhausted.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

// Published nodes and weights, kept at full printed precision.
#[allow(clippy::excessive_precision)]
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
#[allow(clippy::excessive_precision)]
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Values that can be integrated: real or complex scalars.
pub trait QuadValue:
    Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
    fn zero() -> Self;
    fn modulus(self) -> f64;
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
}

/// Tolerances and budget for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-15,
            max_subdivisions: 10_000,
        }
    }
}

impl QuadOptions {
    pub fn with_rel_tol(mut self, rel_tol: f64) -> Self {
        self.rel_tol = rel_tol;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<T> {
    pub value: T,
    pub error: f64,
    pub subdivisions: usize,
}

struct Segment<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
}

impl<T> PartialEq for Segment<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
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
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> (T, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron = kron + pair * w;
        if j % 2 == 1 {
            gauss = gauss + pair * WG[j / 2];
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).modulus();
    (value, error)
}

/// Integrates `f` over `[a, b]`.
pub fn integrate<T, F>(f: F, a: f64, b: f64, opts: &QuadOptions) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    integrate_with_breakpoints(f, a, b, &[], opts)
}

/// Integrates `f` over `[a, b]`, seeding the subdivision with interior
/// `breakpoints` (peaks, kinks or discontinuities of the integrand).
pub fn integrate_with_breakpoints<T, F>(
    mut f: F,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    opts: &QuadOptions,
) -> Result<QuadResult<T>>
where
    T: QuadValue,
    F: FnMut(f64) -> T,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Domain(format!(
            "non-finite integration bounds [{a}, {b}]"
        )));
    }
    if a == b {
        return Ok(QuadResult {
            value: T::zero(),
            error: 0.0,
            subdivisions: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|p| p.is_finite() && *p > lo && *p < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(lo);
    nodes.extend(cuts);
    nodes.push(hi);

    let mut heap = BinaryHeap::new();
    let mut frozen_value = T::zero();
    let mut frozen_error = 0.0;
    let mut total = T::zero();
    let mut total_error = 0.0;
    for w in nodes.windows(2) {
        let (value, error) = kronrod(&mut f, w[0], w[1]);
        total = total + value;
        total_error += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let min_width = (hi - lo) * 1e-14;
    let mut subdivisions = heap.len();
    loop {
        let tolerance = opts.abs_tol.max(opts.rel_tol * total.modulus());
        if total_error <= tolerance {
            break;
        }
        let Some(worst) = heap.pop() else {
            break;
        };
        if worst.b - worst.a <= min_width {
            // Cannot refine further; keep its contribution and move on.
            frozen_value = frozen_value + worst.value;
            frozen_error += worst.error;
            continue;
        }
        if subdivisions >= opts.max_subdivisions {
            heap.push(worst);
            return Err(Error::IntegrationFailure {
                estimate: total_error,
                requested: tolerance,
                subdivisions,
            });
        }
        let mid = 0.5 * (worst.a + worst.b);
        let (lv, le) = kronrod(&mut f, worst.a, mid);
        let (rv, re) = kronrod(&mut f, mid, worst.b);
        total = total - worst.value + lv + rv;
        total_error += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        subdivisions += 1;
    }

    // Re-sum from the segments to shed the drift of the running totals.
    let mut value = frozen_value;
    let mut error = frozen_error;
    for seg in heap.iter() {
        value = value + seg.value;
        error += seg.error;
    }
    let tolerance = opts.abs_tol.max(opts.rel_tol * value.modulus());
    if error > tolerance && frozen_error > tolerance {
        return Err(Error::IntegrationFailure {
            estimate: error,
            requested: tolerance,
            subdivisions,
        });
    }
    Ok(QuadResult {
        value: value * sign,
        error,
        subdivisions,
    })
}
