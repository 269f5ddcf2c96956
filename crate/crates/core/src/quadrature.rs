//! Globally adaptive 7-point Gauss / 15-point Kronrod quadrature.

// The node tables carry more digits than f64 holds.
#![allow(clippy::excessive_precision)]

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

// Kronrod abscissae (positive half, descending) and weights; every second
// node, starting from the first, is shared with the 7-point Gauss rule.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];

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

const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Stopping rule: the summed error estimate must fall below
/// `max(abs_tol, rel_tol * |integral|)`.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, bound(serialize = "S: Scalar", deserialize = "S: Scalar"))]
pub struct QuadOptions<S> {
    pub abs_tol: S,
    pub rel_tol: S,
    pub max_intervals: usize,
}

impl<S: Scalar> Default for QuadOptions<S> {
    fn default() -> Self {
        QuadOptions {
            abs_tol: S::lit(1e-12),
            rel_tol: S::zero(),
            max_intervals: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult<S> {
    pub value: S,
    pub abs_error: S,
    pub intervals: usize,
    pub evaluations: usize,
}

struct Segment<S> {
    a: S,
    b: S,
    value: S,
    error: S,
    converged: bool,
}

impl<S: Scalar> PartialEq for Segment<S> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<S: Scalar> Eq for Segment<S> {}

impl<S: Scalar> PartialOrd for Segment<S> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

// Max-heap on error; segments already at the roundoff floor sort last.
impl<S: Scalar> Ord for Segment<S> {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .converged
            .cmp(&self.converged)
            .then_with(|| self.error.partial_cmp(&other.error).unwrap_or(Ordering::Equal))
    }
}

/// One Gauss-Kronrod 7-15 panel: `(kronrod, error estimate, at_roundoff)`.
pub fn gauss_kronrod_15<S: Scalar, F: Fn(S) -> S>(f: &F, a: S, b: S) -> (S, S, bool) {
    let half = S::lit(0.5);
    let center = half * (a + b);
    let half_len = half * (b - a);
    let fc = f(center);
    let mut kronrod = fc * S::lit(WGK[7]);
    let mut gauss = fc * S::lit(WG[3]);
    let mut res_abs = kronrod.abs();
    let mut fv1 = [S::zero(); 7];
    let mut fv2 = [S::zero(); 7];
    for j in 0..7 {
        let dx = half_len * S::lit(XGK[j]);
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        let w = S::lit(WGK[j]);
        kronrod = kronrod + w * (f1 + f2);
        res_abs = res_abs + w * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss = gauss + S::lit(WG[j / 2]) * (f1 + f2);
        }
    }
    let mean = kronrod * half;
    let mut res_asc = S::lit(WGK[7]) * (fc - mean).abs();
    for j in 0..7 {
        res_asc = res_asc + S::lit(WGK[j]) * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let len = half_len.abs();
    let result = kronrod * half_len;
    let res_abs = res_abs * len;
    let res_asc = res_asc * len;
    let mut err = ((kronrod - gauss) * half_len).abs();
    if res_asc != S::zero() && err != S::zero() {
        let scale = (S::lit(200.0) * err / res_asc).powf(S::lit(1.5));
        err = if scale < S::one() { res_asc * scale } else { res_asc };
    }
    let floor = S::lit(50.0) * S::epsilon() * res_abs;
    let at_roundoff = err <= floor;
    if res_abs > S::min_positive_value() / (S::lit(50.0) * S::epsilon()) {
        err = err.max(floor);
    }
    (result, err, at_roundoff)
}

/// Integrates `f` over `[a, b]`, always bisecting the panel with the
/// largest error estimate.
///
/// Fails with [`Error::QuadratureFailure`] when `max_intervals` panels do
/// not meet the tolerance.
pub fn integrate<S: Scalar, F: Fn(S) -> S>(f: F, a: S, b: S, opts: &QuadOptions<S>) -> Result<QuadResult<S>> {
    if a == b {
        return Ok(QuadResult {
            value: S::zero(),
            abs_error: S::zero(),
            intervals: 0,
            evaluations: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let (value, error, at_roundoff) = gauss_kronrod_15(&f, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    heap.push(Segment {
        a,
        b,
        value,
        error,
        converged: at_roundoff,
    });
    let mut intervals = 1;
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if !total.is_finite() || !total_err.is_finite() {
            break;
        }
        if total_err <= tol {
            return Ok(QuadResult {
                value: total,
                abs_error: total_err,
                intervals,
                evaluations,
            });
        }
        let worst = match heap.peek() {
            Some(s) if !s.converged => heap.pop().expect("peeked"),
            // Every panel is at its roundoff floor; more bisection cannot help.
            _ => {
                return Ok(QuadResult {
                    value: total,
                    abs_error: total_err,
                    intervals,
                    evaluations,
                })
            }
        };
        if intervals >= opts.max_intervals {
            heap.push(worst);
            break;
        }
        let mid = S::lit(0.5) * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            heap.push(Segment {
                converged: true,
                ..worst
            });
            continue;
        }
        let (v1, e1, r1) = gauss_kronrod_15(&f, worst.a, mid);
        let (v2, e2, r2) = gauss_kronrod_15(&f, mid, worst.b);
        evaluations += 30;
        intervals += 1;
        total = total - worst.value + v1 + v2;
        total_err = total_err - worst.error + e1 + e2;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
            converged: r1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
            converged: r2,
        });
        // Resum to keep the running totals from drifting.
        if intervals % 64 == 0 {
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
    Err(Error::QuadratureFailure {
        intervals,
        error: total_err.to_f64().unwrap_or(f64::NAN),
        tolerance: tol.to_f64().unwrap_or(f64::NAN),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight() -> QuadOptions<f64> {
        QuadOptions {
            abs_tol: 0.0,
            rel_tol: 1e-13,
            max_intervals: 2000,
        }
    }

    #[test]
    fn polynomials_are_exact() {
        let r = integrate(|x: f64| x.powi(5) - 3.0 * x * x + 1.0, -1.0, 2.0, &tight()).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0) + 3.0;
        assert!((r.value - exact).abs() < 1e-13);
        assert_eq!(r.intervals, 1);
    }

    #[test]
    fn exponential_and_reversed_limits() {
        let r = integrate(|x: f64| (-7.0 * x).exp(), 0.0, 3.0, &tight()).unwrap();
        let exact = -(-21.0_f64).exp_m1() / 7.0;
        assert!(((r.value - exact) / exact).abs() < 1e-13);
        let rev = integrate(|x: f64| (-7.0 * x).exp(), 3.0, 0.0, &tight()).unwrap();
        assert!((rev.value + r.value).abs() < 1e-14);
        assert!(r.abs_error <= 1e-13 * exact.abs() + 1e-30);
    }

    #[test]
    fn endpoint_singularity_needs_subdivision() {
        let r = integrate(
            |x: f64| x.sqrt(),
            0.0,
            1.0,
            &QuadOptions {
                abs_tol: 1e-12,
                ..tight()
            },
        )
        .unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-11);
        assert!(r.intervals > 1);
    }

    #[test]
    fn reports_failure_when_budget_exhausted() {
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_intervals: 3,
        };
        let err = integrate(|x: f64| (1.0 / (x + 1e-3)).sin(), 0.0, 1.0, &opts).unwrap_err();
        assert!(matches!(err, Error::QuadratureFailure { .. }));
    }

    #[test]
    fn works_in_single_precision() {
        let opts = QuadOptions {
            abs_tol: 1e-5_f32,
            rel_tol: 0.0,
            max_intervals: 100,
        };
        let r = integrate(|x: f32| x.cos(), 0.0, 1.0, &opts).unwrap();
        assert!((r.value - 1.0_f32.sin()).abs() < 1e-5);
    }
}
