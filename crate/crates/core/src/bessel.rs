//! Bessel functions of the first kind `J_0 … J_8` on the nonnegative half-line
//! and the positive zeros of `J_0`.
//!
//! Evaluation uses three regimes:
//!
//! * `z <= 6`: the power series `J_n(z) = Σ (-1)^k (z/2)^(2k+n) / (k! (n+k)!)`
//!   summed with a term recurrence;
//! * `6 < z <= 25`: Miller's backward recurrence normalised by
//!   `J_0 + 2 Σ J_2k = 1`, which yields every order at once and does not
//!   suffer the cancellation of the series;
//! * `z > 25`: the Hankel asymptotic expansion for `J_0`, `J_1`, summed until
//!   the terms drop below `1e-17`, followed by forward recurrence for `n >= 2`
//!   (stable since `n < z`).
//!
//! Zeros of `J_0` are located inside the bracket `[π(n - 1/4), π(n - 1/8)]`,
//! where a sign change is guaranteed, by bisection followed by Newton polish
//! with `J_0' = -J_1`.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{domain, Error, Result};
use crate::parallel::{self, Execution};

/// Highest supported order.
pub const MAX_ORDER: u32 = 8;

/// Largest table the builder accepts.
pub const MAX_TABLE_CAPACITY: usize = 10_000;

/// Residual accepted for a stored zero.
pub const ZERO_RESIDUAL: f64 = 1e-12;

const SERIES_LIMIT: f64 = 6.0;
const ASYMPTOTIC_LIMIT: f64 = 25.0;
const BISECTION_STEPS: usize = 60;
const NEWTON_STEPS: usize = 5;

fn check_argument(z: f64) -> Result<()> {
    if !z.is_finite() || z < 0.0 {
        return domain(format!("Bessel argument must be finite and nonnegative, got {z}"));
    }
    Ok(())
}

/// `J_0(z)` for `z >= 0`.
pub fn eval_j0(z: f64) -> Result<f64> {
    check_argument(z)?;
    Ok(j0(z))
}

/// `J_1(z)` for `z >= 0`.
pub fn eval_j1(z: f64) -> Result<f64> {
    check_argument(z)?;
    Ok(j1(z))
}

/// `J_n(z)` for `0 <= n <= 8`, `z >= 0`.
pub fn eval_jn(n: u32, z: f64) -> Result<f64> {
    if n > MAX_ORDER {
        return Err(Error::UnsupportedOrder {
            order: n,
            max: MAX_ORDER,
        });
    }
    check_argument(z)?;
    Ok(jn(n, z))
}

pub(crate) fn j0(z: f64) -> f64 {
    if z <= SERIES_LIMIT {
        series(0, z)
    } else if z <= ASYMPTOTIC_LIMIT {
        miller(0, z)
    } else {
        hankel(0, z)
    }
}

pub(crate) fn j1(z: f64) -> f64 {
    if z <= SERIES_LIMIT {
        series(1, z)
    } else if z <= ASYMPTOTIC_LIMIT {
        miller(1, z)
    } else {
        hankel(1, z)
    }
}

pub(crate) fn jn(n: u32, z: f64) -> f64 {
    match n {
        0 => j0(z),
        1 => j1(z),
        _ if z <= SERIES_LIMIT => series(n, z),
        _ if z <= ASYMPTOTIC_LIMIT => miller(n, z),
        _ => {
            // forward recurrence J_{k+1} = (2k/z) J_k - J_{k-1}
            let (mut prev, mut cur) = (hankel(0, z), hankel(1, z));
            for k in 1..n {
                let next = 2.0 * f64::from(k) / z * cur - prev;
                prev = cur;
                cur = next;
            }
            cur
        }
    }
}

fn series(n: u32, z: f64) -> f64 {
    let half = 0.5 * z;
    let mut term = 1.0;
    for k in 1..=n {
        term *= half / f64::from(k);
    }
    if term == 0.0 {
        return 0.0;
    }
    let q = half * half;
    let mut sum = term;
    let mut k = 1.0;
    let order = f64::from(n);
    loop {
        term *= -q / (k * (order + k));
        if term.abs() < 1e-18 * (sum.abs() + 1.0) {
            break;
        }
        sum += term;
        k += 1.0;
    }
    sum
}

fn miller(n: u32, z: f64) -> f64 {
    let start = {
        let m = (z + 30.0 + 6.0 * z.cbrt()).ceil() as usize + n as usize;
        m + (m % 2)
    };
    let mut next = 0.0; // f_{k+1}
    let mut cur = 1e-30; // f_k, k = start
    let mut norm = 0.0;
    let mut wanted = if start == n as usize { cur } else { 0.0 };
    for k in (1..=start).rev() {
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let prev = 2.0 * k as f64 / z * cur - next;
        next = cur;
        cur = prev;
        if k - 1 == n as usize {
            wanted = cur;
        }
        if cur.abs() > 1e250 {
            cur *= 1e-250;
            next *= 1e-250;
            norm *= 1e-250;
            wanted *= 1e-250;
        }
    }
    norm += cur;
    wanted / norm
}

/// Hankel expansion `J_ν(z) = sqrt(2/(πz)) (P cos ω - Q sin ω)`,
/// `ω = z - (ν/2 + 1/4)π`, for `ν ∈ {0, 1}`.
fn hankel(nu: u32, z: f64) -> f64 {
    let mu = 4.0 * f64::from(nu * nu);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut k = 1u32;
    loop {
        let odd = f64::from(2 * k - 1);
        let next = term * (mu - odd * odd) / (8.0 * f64::from(k) * z);
        if next.abs() >= term.abs() && k > 1 {
            break;
        }
        term = next;
        // a_k / z^k enters P (k even) or Q (k odd) with sign (-1)^{floor(k/2)}
        let signed = if (k / 2).is_multiple_of(2) { term } else { -term };
        if k.is_multiple_of(2) {
            p += signed;
        } else {
            q += signed;
        }
        if term.abs() < 1e-17 {
            break;
        }
        k += 1;
    }
    let (s, c) = z.sin_cos();
    // expand cos/sin of (z - phase) exactly in z to avoid rounding z - phase
    let (cos_w, sin_w) = if nu == 0 {
        ((c + s) * FRAC_1_SQRT_2, (s - c) * FRAC_1_SQRT_2)
    } else {
        ((s - c) * FRAC_1_SQRT_2, -(s + c) * FRAC_1_SQRT_2)
    };
    (2.0 / (PI * z)).sqrt() * (p * cos_w - q * sin_w)
}

/// Certified bracket `[π(n - 1/4), π(n - 1/8)]` for the n-th zero of `J_0`.
pub fn zero_bracket(n: usize) -> (f64, f64) {
    let n = n as f64;
    (PI * (n - 0.25), PI * (n - 0.125))
}

/// The n-th positive zero of `J_0` (`n >= 1`).
pub fn zero_j0(n: usize) -> Result<f64> {
    if n == 0 {
        return domain("zeros of J0 are indexed from 1");
    }
    let (mut lo, mut hi) = zero_bracket(n);
    let (f_lo, f_hi) = (j0(lo), j0(hi));
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_hi == 0.0 {
        return Ok(hi);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Internal(format!(
            "J0 does not change sign on the bracket of zero {n}: J0({lo}) = {f_lo:e}, J0({hi}) = {f_hi:e}"
        )));
    }
    let lo_sign = f_lo.signum();
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let f_mid = j0(mid);
        if f_mid == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if f_mid.signum() == lo_sign {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (bracket_lo, bracket_hi) = zero_bracket(n);
    let mut z = 0.5 * (lo + hi);
    let mut f = j0(z);
    for _ in 0..NEWTON_STEPS {
        if f == 0.0 {
            break;
        }
        let step = f / j1(z);
        let candidate = z + step;
        if !(bracket_lo..=bracket_hi).contains(&candidate) {
            break;
        }
        let f_candidate = j0(candidate);
        if f_candidate.abs() >= f.abs() {
            break;
        }
        z = candidate;
        f = f_candidate;
    }
    if f.abs() > ZERO_RESIDUAL {
        return Err(Error::Internal(format!(
            "zero {n} of J0 not resolved: |J0({z})| = {:e}",
            f.abs()
        )));
    }
    Ok(z)
}

/// Zeros `j_n` of `J_0` with the derivative values `J_0'(j_n) = -J_1(j_n)`.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, PartialEq)]
pub struct BesselTable {
    zeros: Vec<f64>,
    deriv_at_zero: Vec<f64>,
    min_scaled_deriv: f64,
}

impl BesselTable {
    pub fn capacity(&self) -> usize {
        self.zeros.len()
    }

    pub fn zeros(&self) -> &[f64] {
        &self.zeros
    }

    pub fn derivs(&self) -> &[f64] {
        &self.deriv_at_zero
    }

    /// `j_n`, 1-based.
    #[inline]
    pub fn zero(&self, n: usize) -> f64 {
        self.zeros[n - 1]
    }

    /// `J_0'(j_n)`, 1-based.
    #[inline]
    pub fn deriv(&self, n: usize) -> f64 {
        self.deriv_at_zero[n - 1]
    }

    /// `max_n |J_0'(j_n)|` over the table.
    pub fn max_abs_deriv(&self) -> f64 {
        self.deriv_at_zero.iter().fold(0.0, |m, d| m.max(d.abs()))
    }

    /// Lower bound for `sqrt(j_n) |J_0'(j_n)|` valid for every `n`, stored
    /// or not.
    ///
    /// The sequence decreases to its limit `sqrt(2/π)`, so the minimum over the
    /// table, capped by the limit and shaved by 0.1%, bounds the tail as well.
    pub fn scaled_deriv_floor(&self) -> f64 {
        self.min_scaled_deriv
    }

    /// `j_n` for any `n >= 1`, computing it on the fly beyond the table.
    pub(crate) fn zero_or_compute(&self, n: usize) -> Result<f64> {
        if n <= self.capacity() {
            Ok(self.zero(n))
        } else {
            zero_j0(n)
        }
    }
}

/// Build a table of the first `count` zeros of `J_0`.
pub fn build_table(count: usize) -> Result<BesselTable> {
    build_table_with(count, Execution::default())
}

pub fn build_table_with(count: usize, exec: Execution) -> Result<BesselTable> {
    if count == 0 || count > MAX_TABLE_CAPACITY {
        return domain(format!(
            "table capacity must be in 1..={MAX_TABLE_CAPACITY}, got {count}"
        ));
    }
    let zeros = parallel::map_indexed(exec, count, |i| zero_j0(i + 1))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let deriv_at_zero: Vec<f64> = zeros.iter().map(|&z| -j1(z)).collect();
    let limit = (2.0 / PI).sqrt();
    let min_scaled_deriv = zeros
        .iter()
        .zip(&deriv_at_zero)
        .map(|(z, d)| z.sqrt() * d.abs())
        .fold(limit, f64::min)
        * 0.999;
    Ok(BesselTable {
        zeros,
        deriv_at_zero,
        min_scaled_deriv,
    })
}
