//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Panels are kept in a max-heap keyed by their error estimate `|K15 - G7|`;
//! the worst panel is bisected until the summed estimate falls below the
//! tolerance. The estimate is floored at a small multiple of the roundoff
//! carried by `∫|f|`, below which no tolerance is attainable in `f64`.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{domain, Error, Result};

/// Maximum number of live panels.
pub const PANEL_BUDGET: usize = 1 << 14;

const KRONROD_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const KRONROD_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the odd-indexed Kronrod nodes (1, 3, 5, 7).
const GAUSS_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
    abs_value: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.lo.total_cmp(&self.lo))
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);
    let mut kronrod = KRONROD_WEIGHTS[7] * f_center;
    let mut gauss = GAUSS_WEIGHTS[3] * f_center;
    let mut abs_value = KRONROD_WEIGHTS[7] * f_center.abs();
    for i in 0..7 {
        let dx = half * KRONROD_NODES[i];
        let (left, right) = (f(center - dx), f(center + dx));
        kronrod += KRONROD_WEIGHTS[i] * (left + right);
        abs_value += KRONROD_WEIGHTS[i] * (left.abs() + right.abs());
        if i % 2 == 1 {
            gauss += GAUSS_WEIGHTS[i / 2] * (left + right);
        }
    }
    Panel {
        lo,
        hi,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
        abs_value: abs_value * half.abs(),
    }
}

/// `∫_lo^hi f` to absolute accuracy `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    integrate_with_breaks(f, &[lo, hi], tol)
}

/// Like [`integrate`], with the initial panels given by the increasing
/// sequence `breaks` (first and last entries are the limits). Placing breaks at
/// kinks or between oscillations of the integrand saves most of the
/// subdivision work.
pub fn integrate_with_breaks<F: Fn(f64) -> f64>(f: F, breaks: &[f64], tol: f64) -> Result<f64> {
    if breaks.len() < 2 {
        return domain("integration needs at least two limits");
    }
    if !(tol > 0.0) {
        return domain(format!("quadrature tolerance must be positive, got {tol}"));
    }
    if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[0] >= w[1]) {
        return domain("integration limits must be finite and strictly increasing");
    }
    if breaks.len() - 1 > PANEL_BUDGET {
        return domain(format!(
            "{} initial panels exceed the budget of {PANEL_BUDGET}",
            breaks.len() - 1
        ));
    }

    let mut heap: BinaryHeap<Panel> = breaks.windows(2).map(|w| gauss_kronrod(&f, w[0], w[1])).collect();
    let sums = |heap: &BinaryHeap<Panel>| {
        heap.iter().fold((0.0, 0.0, 0.0), |acc, p| {
            (acc.0 + p.value, acc.1 + p.error, acc.2 + p.abs_value)
        })
    };
    let (_, mut error, mut abs_total) = sums(&heap);

    loop {
        if error <= tol.max(50.0 * f64::EPSILON * abs_total) {
            // running updates can cancel badly once a large panel is split;
            // confirm against a fresh sum before accepting
            let total;
            (total, error, abs_total) = sums(&heap);
            if error <= tol.max(50.0 * f64::EPSILON * abs_total) {
                return Ok(total);
            }
        }
        if heap.len() >= PANEL_BUDGET {
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.lo + worst.hi);
        if mid <= worst.lo || mid >= worst.hi {
            // cannot split further in f64
            heap.push(worst);
            break;
        }
        let left = gauss_kronrod(&f, worst.lo, mid);
        let right = gauss_kronrod(&f, mid, worst.hi);
        error += left.error + right.error - worst.error;
        abs_total += left.abs_value + right.abs_value - worst.abs_value;
        heap.push(left);
        heap.push(right);
    }
    let (total, error, _) = sums(&heap);
    Err(Error::Accuracy {
        estimate: total,
        achieved: error,
        tolerance: tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::{j0, j1, zero_j0};
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_integrand() {
        assert_eq!(integrate(|_| 0.0, -3.0, 7.0, 1e-12).unwrap(), 0.0);
    }

    #[test]
    fn polynomials_and_smooth_functions() {
        let v = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-13).unwrap();
        assert_abs_diff_eq!(v, 64.0 / 6.0 - 4.0, epsilon = 1e-13);
        let v = integrate(f64::exp, 0.0, 1.0, 1e-14).unwrap();
        assert_abs_diff_eq!(v, std::f64::consts::E - 1.0, epsilon = 1e-14);
    }

    #[test]
    fn bessel_moment_identities() {
        let j1z = zero_j0(1).unwrap();
        let v = integrate(|s| s * j0(s), 0.0, j1z, 1e-12).unwrap();
        assert_abs_diff_eq!(v, j1z * j1(j1z), epsilon = 1e-12);

        let j3z = zero_j0(3).unwrap();
        let v = integrate(|s| s * j0(s) * j0(s), 0.0, j3z, 1e-12).unwrap();
        assert_abs_diff_eq!(v, 0.5 * j3z * j3z * j1(j3z).powi(2), epsilon = 1e-12);
    }

    #[test]
    fn kinks_resolved_with_breaks() {
        let f = |x: f64| (x - 0.3).abs();
        let v = integrate_with_breaks(f, &[0.0, 0.3, 1.0], 1e-14).unwrap();
        assert_abs_diff_eq!(v, 0.5 * (0.09 + 0.49), epsilon = 1e-14);
    }

    #[test]
    fn budget_exhaustion_reports_estimate() {
        // ~1.6e6 oscillations cannot be resolved by 2^14 panels
        let err = integrate(|x: f64| (1e7 * x).sin(), 0.0, 1.0, 1e-12).unwrap_err();
        assert!(matches!(err, Error::Accuracy { .. }));
    }

    #[test]
    fn huge_spike_does_not_cancel_running_sums() {
        let v = integrate(|x: f64| (x.abs() + 1e-300).powf(-0.9), -1.0, 1.0, 1e-10).unwrap();
        assert_abs_diff_eq!(v, 20.0, epsilon = 1e-9);
    }

    #[test]
    fn rejects_bad_limits() {
        assert!(integrate(|x| x, 1.0, 0.0, 1e-10).is_err());
        assert!(integrate(|x| x, 0.0, 1.0, 0.0).is_err());
        assert!(integrate_with_breaks(|x| x, &[0.0], 1e-10).is_err());
    }
}
