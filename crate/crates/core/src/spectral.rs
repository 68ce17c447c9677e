//! Series solution of `u_t = ((x - a) u_x)_x` on `(a, 1)` with `u(1, t) = 0`:
//!
//! ```text
//! u(x, t)    = Σ 2 / (j_n² J_0'(j_n)²) · f_n · U_n(a) · J_0(j_n sqrt((x-a)/(1-a)))
//! u_x(1, t)  = Σ f_n / ((1-a) j_n J_0'(j_n)) · U_n(a)
//! f_n(t, a)  = exp(-(j_n/2)² t / (1-a))
//! ```
//!
//! The eigenfunctions `J_0(j_n sqrt((x-a)/(1-a)))` have squared `L²(a, 1)`
//! norm `(1-a) J_0'(j_n)²`; that norm is what fixes the coefficient so that
//! `u(x, 0) = u_0(x)`.
//!
//! Every sum is truncated by a certificate. With `|U_n| <= ‖u_0‖ j_n²/2`,
//! `|J_0| <= 1` and `sqrt(j_n)|J_0'(j_n)| >= c` (see
//! [`BesselTable::scaled_deriv_floor`]) each term is dominated by a sum of
//! `C j_n^p exp(-j_n² τ)`, `τ = t / (4(1-a))`. Consecutive majorant ratios
//! are bounded through `π(n - 1/4) <= j_n <= π(n - 1/8)` by a quantity `R(m)`
//! that decreases in `m`, so the discarded tail after `n` terms is at most
//! `g(n+1) / (1 - R(n+1))` once `R(n+1) < 1`.

use std::f64::consts::PI;

use crate::bessel::{j0, BesselTable};
use crate::error::{domain, Error, Result};
use crate::initial_data::{
    closed_weight, closed_weight_derivative, weight_by_quadrature, weight_derivative_by_quadrature,
    InitialProfile, WeightRequest, DEFAULT_QUAD_TOL,
};

/// Series truncation control.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TruncationPolicy {
    pub max_terms: usize,
    pub tail_tol: f64,
    /// Smallest admissible evaluation time.
    pub t_min: f64,
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self {
            max_terms: 2000,
            tail_tol: 1e-12,
            t_min: 1e-4,
        }
    }
}

impl TruncationPolicy {
    pub fn validate(&self, table: &BesselTable) -> Result<()> {
        if self.max_terms == 0 || self.max_terms > table.capacity() {
            return Err(Error::Config(format!(
                "max_terms must be in 1..={} (table capacity), got {}",
                table.capacity(),
                self.max_terms
            )));
        }
        if !(self.tail_tol > 0.0) || !(self.t_min > 0.0) {
            return Err(Error::Config("tail_tol and t_min must be positive".to_string()));
        }
        Ok(())
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t < self.t_min {
            return domain(format!("time {t} below t_min = {}", self.t_min));
        }
        Ok(())
    }
}

/// Evaluation request for `μ(a, t)` and friends.
#[derive(Debug, Clone, Copy)]
pub struct TraceQuery<'a> {
    pub profile: &'a InitialProfile,
    pub a: f64,
    pub t: f64,
    pub table: &'a BesselTable,
    pub policy: TruncationPolicy,
}

impl<'a> TraceQuery<'a> {
    pub fn new(profile: &'a InitialProfile, a: f64, t: f64, table: &'a BesselTable) -> Self {
        Self {
            profile,
            a,
            t,
            table,
            policy: TruncationPolicy::default(),
        }
    }

    pub fn with_policy(self, policy: TruncationPolicy) -> Self {
        Self { policy, ..self }
    }

    fn evaluator(&self) -> Result<TraceEvaluator<'a>> {
        TraceEvaluator::new(self.profile, self.a, self.table, self.policy)
    }
}

/// A truncated series with its certified tail bound.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SeriesValue {
    pub value: f64,
    pub terms_used: usize,
    pub tail_bound: f64,
}

fn check_a(a: f64) -> Result<()> {
    if !(0.0..1.0).contains(&a) {
        return domain(format!("degeneracy point must lie in [0, 1), got {a}"));
    }
    Ok(())
}

fn check_mode(table: &BesselTable, n: usize) -> Result<()> {
    if n == 0 || n > table.capacity() {
        return domain(format!(
            "mode {n} outside the table (capacity {})",
            table.capacity()
        ));
    }
    Ok(())
}

/// `λ_n = j_n² / (4(1-a))`.
pub fn eigenvalue(table: &BesselTable, n: usize, a: f64) -> Result<f64> {
    check_a(a)?;
    check_mode(table, n)?;
    let j = table.zero(n);
    Ok(j * j / (4.0 * (1.0 - a)))
}

/// `φ_n(x) = J_0(j_n sqrt((x-a)/(1-a))) / |J_0'(j_n)|`.
pub fn eigenfunction_value(table: &BesselTable, n: usize, a: f64, x: f64) -> Result<f64> {
    check_a(a)?;
    check_mode(table, n)?;
    if !(a..=1.0).contains(&x) {
        return domain(format!("x = {x} outside [{a}, 1]"));
    }
    let y = (x - a) / (1.0 - a);
    Ok(j0(table.zero(n) * y.sqrt()) / table.deriv(n).abs())
}

/// `u(x, t)`.
pub fn solution_value(q: &TraceQuery<'_>, x: f64) -> Result<SeriesValue> {
    q.evaluator()?.solution(x, q.t)
}

/// `μ(a, t) = u_x(1, t)`.
pub fn boundary_trace(q: &TraceQuery<'_>) -> Result<SeriesValue> {
    q.evaluator()?.trace(q.t)
}

/// `∂_a μ(a, t)`.
pub fn boundary_trace_da(q: &TraceQuery<'_>) -> Result<SeriesValue> {
    q.evaluator()?.trace_da(q.t)
}

/// Series evaluator for one `(profile, a)` pair.
///
/// Weights `U_n(a)` and `U_n'(a)` are memoised on first use, so evaluating
/// several times or several points reuses the quadrature work. The memo is
/// owned by the evaluator; share the table, not the evaluator, across
/// threads.
#[derive(Debug, Clone)]
pub struct TraceEvaluator<'a> {
    profile: &'a InitialProfile,
    a: f64,
    table: &'a BesselTable,
    policy: TruncationPolicy,
    quad_tol: f64,
    weights: Vec<f64>,
    weight_derivs: Vec<f64>,
}

impl<'a> TraceEvaluator<'a> {
    pub fn new(
        profile: &'a InitialProfile,
        a: f64,
        table: &'a BesselTable,
        policy: TruncationPolicy,
    ) -> Result<Self> {
        check_a(a)?;
        policy.validate(table)?;
        Ok(Self {
            profile,
            a,
            table,
            policy,
            quad_tol: DEFAULT_QUAD_TOL,
            weights: Vec::new(),
            weight_derivs: Vec::new(),
        })
    }

    pub fn with_quad_tol(mut self, quad_tol: f64) -> Self {
        self.quad_tol = quad_tol;
        self
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    fn request(&self, n: usize) -> WeightRequest<'a> {
        WeightRequest {
            profile: self.profile,
            a: self.a,
            n,
            table: self.table,
            quad_tol: self.quad_tol,
        }
    }

    /// `U_n(a)`, memoised.
    pub fn weight(&mut self, n: usize) -> Result<f64> {
        while self.weights.len() < n {
            let m = self.weights.len() + 1;
            let (j, dj) = (self.table.zero(m), self.table.deriv(m));
            let w = match closed_weight(self.profile, self.a, j, dj) {
                Some(w) => w,
                None => weight_by_quadrature(&self.request(m))?,
            };
            self.weights.push(w);
        }
        Ok(self.weights[n - 1])
    }

    /// `U_n'(a)`, memoised.
    pub fn weight_derivative(&mut self, n: usize) -> Result<f64> {
        while self.weight_derivs.len() < n {
            let m = self.weight_derivs.len() + 1;
            let (j, dj) = (self.table.zero(m), self.table.deriv(m));
            let w = match closed_weight_derivative(self.profile, self.a, j, dj) {
                Some(w) => w,
                None => weight_derivative_by_quadrature(&self.request(m))?,
            };
            self.weight_derivs.push(w);
        }
        Ok(self.weight_derivs[n - 1])
    }

    fn tau(&self, t: f64) -> f64 {
        t / (4.0 * (1.0 - self.a))
    }

    /// `u(x, t)` for `a <= x <= 1`.
    pub fn solution(&mut self, x: f64, t: f64) -> Result<SeriesValue> {
        self.policy.check_time(t)?;
        if !(self.a..=1.0).contains(&x) {
            return domain(format!("x = {x} outside [{}, 1]", self.a));
        }
        let a = self.a;
        let root_y = ((x - a) / (1.0 - a)).sqrt();
        let c = self.table.scaled_deriv_floor();
        let majorant = [(self.profile.sup_norm() / (c * c), 1.0)];
        let tau = self.tau(t);
        let table = self.table;
        self.sum(tau, &majorant, |ev, n| {
            let (j, dj) = (table.zero(n), table.deriv(n));
            let f = (-j * j * tau).exp();
            if f == 0.0 {
                return Ok(0.0);
            }
            Ok(2.0 / (j * j * dj * dj) * f * ev.weight(n)? * j0(j * root_y))
        })
    }

    /// `μ(a, t)`.
    pub fn trace(&mut self, t: f64) -> Result<SeriesValue> {
        self.policy.check_time(t)?;
        let len = 1.0 - self.a;
        let c = self.table.scaled_deriv_floor();
        let majorant = [(self.profile.sup_norm() / (2.0 * c * len), 1.5)];
        let tau = self.tau(t);
        let table = self.table;
        self.sum(tau, &majorant, |ev, n| {
            let (j, dj) = (table.zero(n), table.deriv(n));
            let f = (-j * j * tau).exp();
            if f == 0.0 {
                return Ok(0.0);
            }
            Ok(f / (len * j * dj) * ev.weight(n)?)
        })
    }

    /// `∂_a μ(a, t)`.
    pub fn trace_da(&mut self, t: f64) -> Result<SeriesValue> {
        self.policy.check_time(t)?;
        // ∂_a [f_n U_n / (1-a)] = f_n [U_n' / (1-a) + U_n / (1-a)² - j_n² t U_n / (4(1-a)³)]
        let len = 1.0 - self.a;
        let c = self.table.scaled_deriv_floor();
        let (norm, dnorm) = (self.profile.sup_norm(), self.profile.deriv_sup_norm());
        let majorant = [
            ((dnorm / len + norm / (len * len)) / (2.0 * c), 1.5),
            (t * norm / (8.0 * c * len.powi(3)), 3.5),
        ];
        let tau = self.tau(t);
        let table = self.table;
        let shift = t / (4.0 * len * len);
        self.sum(tau, &majorant, |ev, n| {
            let (j, dj) = (table.zero(n), table.deriv(n));
            let f = (-j * j * tau).exp();
            if f == 0.0 {
                return Ok(0.0);
            }
            let u = ev.weight(n)?;
            let bracket = ev.weight_derivative(n)? + u / len - j * j * shift * u;
            Ok(f / (len * j * dj) * bracket)
        })
    }

    fn sum<F>(&mut self, tau: f64, majorant: &[(f64, f64)], mut term: F) -> Result<SeriesValue>
    where
        F: FnMut(&mut Self, usize) -> Result<f64>,
    {
        let mut value = 0.0;
        let mut tail = f64::INFINITY;
        for n in 1..=self.policy.max_terms {
            value += term(self, n)?;
            tail = tail_bound(self.table, n, tau, majorant)?;
            if tail <= self.policy.tail_tol * value.abs().max(1.0) {
                return Ok(SeriesValue {
                    value,
                    terms_used: n,
                    tail_bound: tail,
                });
            }
        }
        Err(Error::Truncation {
            value,
            tail_bound: tail,
            terms: self.policy.max_terms,
        })
    }
}

/// Upper bound for `g(k+1)/g(k)`, `k >= m`, where `g(k) = j_k^p e^{-j_k² τ}`.
fn ratio_bound(m: usize, power: f64, tau: f64) -> f64 {
    let m = m as f64;
    let growth = ((m + 0.875) / (m - 0.25)).powf(power);
    let gap = PI * PI * 0.875 * (2.0 * m + 0.625);
    growth * (-gap * tau).exp()
}

/// Bound on `Σ_{m>n} Σ_i c_i j_m^{p_i} e^{-j_m² τ}`.
pub(crate) fn tail_bound(table: &BesselTable, n: usize, tau: f64, majorant: &[(f64, f64)]) -> Result<f64> {
    let m = n + 1;
    let j = table.zero_or_compute(m)?;
    let exponent = j * j * tau;
    let mut total = 0.0;
    for &(coef, power) in majorant {
        if coef == 0.0 {
            continue;
        }
        let lead = coef * (power * j.ln() - exponent).exp();
        if lead == 0.0 {
            continue;
        }
        let r = ratio_bound(m, power, tau);
        if r >= 1.0 {
            return Ok(f64::INFINITY);
        }
        total += lead / (1.0 - r);
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::build_table;
    use approx::{assert_abs_diff_eq, assert_relative_eq};

    fn table() -> BesselTable {
        build_table(2000).unwrap()
    }

    #[test]
    fn eigenvalues() {
        let t = build_table(4).unwrap();
        let j1 = t.zero(1);
        assert_abs_diff_eq!(eigenvalue(&t, 1, 0.0).unwrap(), j1 * j1 / 4.0, epsilon = 1e-15);
        let j2 = t.zero(2);
        assert_abs_diff_eq!(
            eigenvalue(&t, 2, 0.35).unwrap(),
            j2 * j2 / (4.0 * 0.65),
            epsilon = 1e-13
        );
        for n in 1..4 {
            assert!(eigenvalue(&t, n, 0.2).unwrap() < eigenvalue(&t, n, 0.3).unwrap());
            assert!(eigenvalue(&t, n, 0.2).unwrap() < eigenvalue(&t, n + 1, 0.2).unwrap());
        }
        assert!(eigenvalue(&t, 1, 1.0).is_err());
        assert!(eigenvalue(&t, 5, 0.1).is_err());
    }

    #[test]
    fn eigenfunction_endpoints() {
        let t = build_table(6).unwrap();
        for n in 1..=6 {
            assert!(eigenfunction_value(&t, n, 0.35, 1.0).unwrap().abs() < 1e-10);
        }
        assert_abs_diff_eq!(
            eigenfunction_value(&t, 1, 0.0, 0.0).unwrap(),
            1.0 / t.deriv(1).abs(),
            epsilon = 1e-15
        );
        assert!(eigenfunction_value(&t, 1, 0.35, 0.3).is_err());
        assert!(eigenfunction_value(&t, 1, 0.35, 1.01).is_err());
    }

    #[test]
    fn const_one_trace_is_negative_exponential_sum() {
        let t = table();
        let q = TraceQuery::new(&InitialProfile::ConstOne, 0.35, 1.0, &t);
        let mu = boundary_trace(&q).unwrap();
        let direct: f64 = (1..=50)
            .map(|n| -(-(t.zero(n) / 2.0).powi(2) * 1.0 / 0.65).exp() / 0.65)
            .sum();
        assert_abs_diff_eq!(mu.value, direct, epsilon = 1e-14);
        assert!(mu.tail_bound <= 1e-12);
    }

    #[test]
    fn one_minus_x_trace_closed_series() {
        let t = table();
        let (a, time) = (0.6, 0.3);
        let q = TraceQuery::new(&InitialProfile::OneMinusX, a, time, &t);
        let mu = boundary_trace(&q).unwrap();
        let direct: f64 = (1..=200)
            .map(|n| {
                let j = t.zero(n);
                -4.0 * (-(j / 2.0).powi(2) * time / (1.0 - a)).exp() / (j * j)
            })
            .sum();
        assert_abs_diff_eq!(mu.value, direct, epsilon = 1e-14);
    }

    #[test]
    fn const_one_derivative_sign_and_matches_fd() {
        // early on the flux grows with 1/sqrt(1-a); later the first mode dominates
        let t = table();
        let p = InitialProfile::ConstOne;
        let da = |time| {
            boundary_trace_da(&TraceQuery::new(&p, 0.35, time, &t))
                .unwrap()
                .value
        };
        assert!(da(0.05) < 0.0);
        for &time in &[0.5, 1.0, 3.0] {
            assert!(da(time) > 0.0);
        }
        let h = 1e-6;
        let mu = |a| boundary_trace(&TraceQuery::new(&p, a, 1.0, &t)).unwrap().value;
        let fd = (mu(0.35 + h) - mu(0.35 - h)) / (2.0 * h);
        let d = boundary_trace_da(&TraceQuery::new(&p, 0.35, 1.0, &t))
            .unwrap()
            .value;
        assert_relative_eq!(fd, d, max_relative = 1e-4);
    }

    #[test]
    fn x_one_minus_x_derivative_sign_near_origin() {
        let t = table();
        let p = InitialProfile::XOneMinusX;
        let at = |time| {
            boundary_trace_da(&TraceQuery::new(&p, 0.0, time, &t))
                .unwrap()
                .value
        };
        assert!(at(0.01) < 0.0);
        assert!(at(0.2) < 0.0);
        assert!(at(1.0) < 0.0);
        let h = 1e-6;
        let mu = |a| boundary_trace(&TraceQuery::new(&p, a, 0.01, &t)).unwrap().value;
        let fd = (mu(2.0 * h) - mu(0.0)) / (2.0 * h);
        assert_relative_eq!(fd, at(0.01), max_relative = 1e-4);
    }

    #[test]
    fn late_time_leading_mode_bound() {
        let t = table();
        for p in [
            InitialProfile::ConstOne,
            InitialProfile::OneMinusX,
            InitialProfile::XOneMinusX,
            InitialProfile::X,
        ] {
            let a = 0.35;
            let time = 20.0 * (1.0 - a);
            let mu = boundary_trace(&TraceQuery::new(&p, a, time, &t)).unwrap().value;
            let mut ev = TraceEvaluator::new(&p, a, &t, TruncationPolicy::default()).unwrap();
            let lead = (ev.weight(1).unwrap() / ((1.0 - a) * t.zero(1) * t.deriv(1))).abs();
            let lambda = eigenvalue(&t, 1, a).unwrap();
            assert!(mu.abs() <= 2.0 * lead * (-lambda * time).exp());
        }
    }

    #[test]
    fn short_time_recovers_initial_datum() {
        let t = build_table(4000).unwrap();
        let policy = TruncationPolicy {
            max_terms: 4000,
            ..Default::default()
        };
        let at = |p: &InitialProfile| {
            solution_value(&TraceQuery::new(p, 0.35, 1e-3, &t).with_policy(policy), 0.7)
                .unwrap()
                .value
        };
        assert_abs_diff_eq!(at(&InitialProfile::ConstOne), 1.0, epsilon = 1e-9);
        // u_t = u_x = 1 for u_0 = x away from the boundary layer
        assert_abs_diff_eq!(at(&InitialProfile::X), 0.7 + 1e-3, epsilon = 1e-5);
    }

    #[test]
    fn dirichlet_boundary() {
        let t = table();
        for &time in &[1e-3, 0.1, 2.0] {
            let q = TraceQuery::new(&InitialProfile::ConstOne, 0.35, time, &t);
            assert!(solution_value(&q, 1.0).unwrap().value.abs() <= 1e-12);
        }
    }

    #[test]
    fn rejects_small_times_and_bad_points() {
        let t = table();
        let p = InitialProfile::ConstOne;
        assert!(boundary_trace(&TraceQuery::new(&p, 0.3, 1e-5, &t)).is_err());
        assert!(boundary_trace(&TraceQuery::new(&p, 1.0, 1.0, &t)).is_err());
        assert!(solution_value(&TraceQuery::new(&p, 0.3, 1.0, &t), 0.2).is_err());
        let tiny = build_table(3).unwrap();
        let q = TraceQuery::new(&p, 0.3, 1.0, &tiny);
        assert!(matches!(boundary_trace(&q), Err(Error::Config(_))));
        let q = q.with_policy(TruncationPolicy {
            max_terms: 3,
            ..Default::default()
        });
        assert!(matches!(
            boundary_trace(&TraceQuery { t: 1e-3, ..q }),
            Err(Error::Truncation { .. })
        ));
    }

    #[test]
    fn certificate_covers_refinement() {
        let t = table();
        for p in [InitialProfile::ConstOne, InitialProfile::X] {
            for &time in &[1e-4, 0.01, 0.3] {
                let coarse = TruncationPolicy {
                    tail_tol: 1e-6,
                    ..Default::default()
                };
                let fine = TruncationPolicy {
                    tail_tol: 5e-7,
                    ..Default::default()
                };
                let q = TraceQuery::new(&p, 0.4, time, &t);
                let a = boundary_trace(&q.with_policy(coarse)).unwrap();
                let b = boundary_trace(&q.with_policy(fine)).unwrap();
                assert!((a.value - b.value).abs() <= a.tail_bound);
            }
        }
    }

    #[test]
    fn ratio_bound_decreases() {
        for &tau in &[1e-5, 1e-3, 0.1] {
            for &p in &[1.0, 1.5, 3.5] {
                let r: Vec<f64> = (1..200).map(|m| ratio_bound(m, p, tau)).collect();
                assert!(r.windows(2).all(|w| w[1] <= w[0]));
            }
        }
    }
}
