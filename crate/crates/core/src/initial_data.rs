//! Initial data `u_0` on `[0, 1]` and the Fourier–Bessel weights
//!
//! ```text
//! U_n(a) = ∫_0^{j_n} u_0(a + (1 - a) s²/j_n²) s J_0(s) ds
//! ```
//!
//! together with their `a`-derivatives. The four reference profiles `1`,
//! `1 - x`, `x(1 - x)` and `x` have closed forms in `j_n` and `J_0'(j_n)`;
//! polynomial and sampled data go through adaptive quadrature.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bessel::{j0, BesselTable};
use crate::error::{domain, Result};
use crate::quadrature::integrate_with_breaks;

/// Highest polynomial degree accepted.
pub const MAX_POLY_DEGREE: usize = 12;

/// Default absolute tolerance for weight quadrature.
pub const DEFAULT_QUAD_TOL: f64 = 1e-11;

const SUP_SAMPLES: usize = 4097;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    ConstOne,
    OneMinusX,
    XOneMinusX,
    X,
    Polynomial,
    Sampled,
}

/// Polynomial `Σ c_k x^k` on `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    coefficients: Vec<f64>,
    derivative: Vec<f64>,
    sup_norm: f64,
    deriv_sup_norm: f64,
}

impl Polynomial {
    /// Monomial coefficients `c_0, c_1, …`.
    ///
    /// Sup-norms come from 4097 equispaced samples padded by half a grid step
    /// times the next derivative's sampled maximum, so they bound the true
    /// norms from above.
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() || coefficients.len() > MAX_POLY_DEGREE + 1 {
            return domain(format!(
                "polynomial needs 1..={} coefficients, got {}",
                MAX_POLY_DEGREE + 1,
                coefficients.len()
            ));
        }
        if coefficients.iter().any(|c| !c.is_finite()) {
            return domain("polynomial coefficients must be finite");
        }
        let derivative = differentiate(&coefficients);
        let second = differentiate(&derivative);
        let h = 1.0 / (SUP_SAMPLES - 1) as f64;
        let sampled_max = |c: &[f64]| {
            (0..SUP_SAMPLES)
                .map(|i| horner(c, i as f64 * h).abs())
                .fold(0.0, f64::max)
        };
        let (u, du, d2u) = (
            sampled_max(&coefficients),
            sampled_max(&derivative),
            sampled_max(&second),
        );
        if u == 0.0 {
            return domain("initial datum must not vanish identically");
        }
        Ok(Self {
            sup_norm: u + 0.5 * h * du,
            deriv_sup_norm: du + 0.5 * h * d2u,
            coefficients,
            derivative,
        })
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }
}

fn differentiate(c: &[f64]) -> Vec<f64> {
    if c.len() <= 1 {
        return vec![0.0];
    }
    c.iter()
        .enumerate()
        .skip(1)
        .map(|(k, ck)| k as f64 * ck)
        .collect()
}

fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, ck| acc * x + ck)
}

/// Piecewise-linear interpolant of `(x, value)` samples spanning `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Samples {
    xs: Vec<f64>,
    values: Vec<f64>,
    sup_norm: f64,
    deriv_sup_norm: f64,
}

impl Samples {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 3 {
            return domain(format!("need at least 3 samples, got {}", points.len()));
        }
        let (xs, values): (Vec<f64>, Vec<f64>) = points.into_iter().unzip();
        if xs.iter().chain(&values).any(|v| !v.is_finite()) {
            return domain("samples must be finite");
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return domain("sample abscissae must be strictly increasing");
        }
        if xs[0].abs() > 1e-12 || (xs[xs.len() - 1] - 1.0).abs() > 1e-12 {
            return domain("samples must span [0, 1]");
        }
        let sup_norm = values.iter().fold(0.0, |m: f64, v| m.max(v.abs()));
        if sup_norm == 0.0 {
            return domain("initial datum must not vanish identically");
        }
        let deriv_sup_norm = xs
            .windows(2)
            .zip(values.windows(2))
            .map(|(x, v)| ((v[1] - v[0]) / (x[1] - x[0])).abs())
            .fold(0.0, f64::max);
        Ok(Self {
            xs,
            values,
            sup_norm,
            deriv_sup_norm,
        })
    }

    pub fn abscissae(&self) -> &[f64] {
        &self.xs
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn segment(&self, x: f64) -> usize {
        // index i with xs[i] <= x < xs[i+1], clamped to the last segment
        let i = self.xs.partition_point(|&xi| xi <= x);
        i.saturating_sub(1).min(self.xs.len() - 2)
    }

    fn value(&self, x: f64) -> f64 {
        let i = self.segment(x);
        let t = (x - self.xs[i]) / (self.xs[i + 1] - self.xs[i]);
        self.values[i] + t * (self.values[i + 1] - self.values[i])
    }

    fn slope(&self, x: f64) -> f64 {
        let i = self.segment(x);
        (self.values[i + 1] - self.values[i]) / (self.xs[i + 1] - self.xs[i])
    }
}

/// Initial datum `u_0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialProfile {
    /// `u_0 = 1`
    ConstOne,
    /// `u_0 = 1 - x`
    OneMinusX,
    /// `u_0 = x (1 - x)`
    XOneMinusX,
    /// `u_0 = x`
    X,
    Polynomial(Polynomial),
    Sampled(Samples),
}

impl InitialProfile {
    pub fn polynomial(coefficients: Vec<f64>) -> Result<Self> {
        Polynomial::new(coefficients).map(Self::Polynomial)
    }

    pub fn sampled(points: Vec<(f64, f64)>) -> Result<Self> {
        Samples::new(points).map(Self::Sampled)
    }

    pub fn kind(&self) -> ProfileKind {
        match self {
            Self::ConstOne => ProfileKind::ConstOne,
            Self::OneMinusX => ProfileKind::OneMinusX,
            Self::XOneMinusX => ProfileKind::XOneMinusX,
            Self::X => ProfileKind::X,
            Self::Polynomial(_) => ProfileKind::Polynomial,
            Self::Sampled(_) => ProfileKind::Sampled,
        }
    }

    /// Whether the weights have a closed form.
    pub fn is_named(&self) -> bool {
        !matches!(self, Self::Polynomial(_) | Self::Sampled(_))
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Self::ConstOne => 1.0,
            Self::OneMinusX => 1.0 - x,
            Self::XOneMinusX => x * (1.0 - x),
            Self::X => x,
            Self::Polynomial(p) => horner(&p.coefficients, x),
            Self::Sampled(s) => s.value(x),
        }
    }

    /// `u_0'(x)`; sampled data use the slope of the containing segment.
    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Self::ConstOne => 0.0,
            Self::OneMinusX => -1.0,
            Self::XOneMinusX => 1.0 - 2.0 * x,
            Self::X => 1.0,
            Self::Polynomial(p) => horner(&p.derivative, x),
            Self::Sampled(s) => s.slope(x),
        }
    }

    /// `‖u_0‖_∞` on `[0, 1]`.
    pub fn sup_norm(&self) -> f64 {
        match self {
            Self::ConstOne | Self::OneMinusX | Self::X => 1.0,
            Self::XOneMinusX => 0.25,
            Self::Polynomial(p) => p.sup_norm,
            Self::Sampled(s) => s.sup_norm,
        }
    }

    /// `‖u_0'‖_∞` on `[0, 1]`.
    pub fn deriv_sup_norm(&self) -> f64 {
        match self {
            Self::ConstOne => 0.0,
            Self::OneMinusX | Self::XOneMinusX | Self::X => 1.0,
            Self::Polynomial(p) => p.deriv_sup_norm,
            Self::Sampled(s) => s.deriv_sup_norm,
        }
    }
}

impl fmt::Display for InitialProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConstOne => write!(f, "one"),
            Self::OneMinusX => write!(f, "one-minus-x"),
            Self::XOneMinusX => write!(f, "x-one-minus-x"),
            Self::X => write!(f, "x"),
            Self::Polynomial(p) => {
                write!(f, "poly:")?;
                for (i, c) in p.coefficients.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{c}")?;
                }
                Ok(())
            }
            Self::Sampled(s) => write!(f, "samples[{} points]", s.xs.len()),
        }
    }
}

/// Arguments of one weight evaluation.
#[derive(Debug, Clone, Copy)]
pub struct WeightRequest<'a> {
    pub profile: &'a InitialProfile,
    pub a: f64,
    /// 1-based mode index.
    pub n: usize,
    pub table: &'a BesselTable,
    pub quad_tol: f64,
}

impl<'a> WeightRequest<'a> {
    pub fn new(profile: &'a InitialProfile, a: f64, n: usize, table: &'a BesselTable) -> Self {
        Self {
            profile,
            a,
            n,
            table,
            quad_tol: DEFAULT_QUAD_TOL,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.a) {
            return domain(format!("degeneracy point must lie in [0, 1), got {}", self.a));
        }
        if self.n == 0 || self.n > self.table.capacity() {
            return domain(format!(
                "mode {} outside the table (capacity {})",
                self.n,
                self.table.capacity()
            ));
        }
        if !(self.quad_tol > 0.0) {
            return domain("quadrature tolerance must be positive");
        }
        Ok(())
    }
}

/// `K(a, j) = -4a(1-a)/j + (1-a)² (4/j)(16/j² - 3)`, so that the
/// `x(1 - x)` weight is `J_0'(j) K(a, j)`.
pub fn k_factor(a: f64, j: f64) -> f64 {
    -4.0 * a * (1.0 - a) / j + (1.0 - a).powi(2) * (4.0 / j) * (16.0 / (j * j) - 3.0)
}

/// `∂_a K(a, j)`.
pub fn k_factor_da(a: f64, j: f64) -> f64 {
    -(4.0 / j) * (1.0 - 2.0 * a) + 2.0 * (a - 1.0) * (4.0 / j) * (16.0 / (j * j) - 3.0)
}

/// Closed-form weight for the named profiles, `None` otherwise.
pub(crate) fn closed_weight(profile: &InitialProfile, a: f64, j: f64, dj: f64) -> Option<f64> {
    let one = -j * dj;
    let one_minus_x = -4.0 * (1.0 - a) * dj / j;
    match profile {
        InitialProfile::ConstOne => Some(one),
        InitialProfile::OneMinusX => Some(one_minus_x),
        InitialProfile::XOneMinusX => Some(dj * k_factor(a, j)),
        // x = 1 - (1 - x)
        InitialProfile::X => Some(one - one_minus_x),
        _ => None,
    }
}

pub(crate) fn closed_weight_derivative(profile: &InitialProfile, a: f64, j: f64, dj: f64) -> Option<f64> {
    match profile {
        InitialProfile::ConstOne => Some(0.0),
        InitialProfile::OneMinusX => Some(4.0 * dj / j),
        InitialProfile::X => Some(-4.0 * dj / j),
        InitialProfile::XOneMinusX => Some(k_factor_da(a, j) * dj),
        _ => None,
    }
}

/// `U_n(a)`.
pub fn weight(req: &WeightRequest<'_>) -> Result<f64> {
    req.validate()?;
    let (j, dj) = (req.table.zero(req.n), req.table.deriv(req.n));
    match closed_weight(req.profile, req.a, j, dj) {
        Some(w) => Ok(w),
        None => weight_by_quadrature(req),
    }
}

/// `U_n'(a)`.
pub fn weight_derivative(req: &WeightRequest<'_>) -> Result<f64> {
    req.validate()?;
    let (j, dj) = (req.table.zero(req.n), req.table.deriv(req.n));
    match closed_weight_derivative(req.profile, req.a, j, dj) {
        Some(w) => Ok(w),
        None => weight_derivative_by_quadrature(req),
    }
}

/// Breakpoints on `[0, j_n]`: the interior zeros of `J_0` plus the images of
/// any sample abscissae inside `(a, 1)`.
fn breakpoints(req: &WeightRequest<'_>) -> Vec<f64> {
    let j = req.table.zero(req.n);
    let mut breaks = Vec::with_capacity(req.n + 1);
    breaks.push(0.0);
    breaks.extend(req.table.zeros()[..req.n - 1].iter().copied());
    breaks.push(j);
    if let InitialProfile::Sampled(s) = req.profile {
        let a = req.a;
        breaks.extend(
            s.xs.iter()
                .filter(|&&x| x > a && x < 1.0)
                .map(|&x| j * ((x - a) / (1.0 - a)).sqrt()),
        );
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * j);
    }
    breaks
}

/// `U_n(a)` by quadrature, for any profile.
pub fn weight_by_quadrature(req: &WeightRequest<'_>) -> Result<f64> {
    req.validate()?;
    let (a, j) = (req.a, req.table.zero(req.n));
    let scale = (1.0 - a) / (j * j);
    let profile = req.profile;
    integrate_with_breaks(
        |s| profile.value(a + scale * s * s) * s * j0(s),
        &breakpoints(req),
        req.quad_tol,
    )
}

/// `U_n'(a)` by quadrature of `u_0'(a + (1-a)s²/j²)(1 - s²/j²) s J_0(s)`.
pub fn weight_derivative_by_quadrature(req: &WeightRequest<'_>) -> Result<f64> {
    req.validate()?;
    let (a, j) = (req.a, req.table.zero(req.n));
    let inv_j2 = 1.0 / (j * j);
    let profile = req.profile;
    integrate_with_breaks(
        |s| {
            let r = s * s * inv_j2;
            profile.derivative(a + (1.0 - a) * r) * (1.0 - r) * s * j0(s)
        },
        &breakpoints(req),
        req.quad_tol,
    )
}
