use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::TraceModel;
use crate::bessel::zero_j0;
use crate::error::{domain, Error, Result};
use crate::initial_data::{weight, InitialProfile, WeightRequest};
use crate::parallel::{map_indexed, map_slice, Execution};

fn check_window(alpha: f64, beta: f64, t0: f64, t1: f64) -> Result<()> {
    if !(0.0 <= alpha && alpha < beta && beta < 1.0) {
        return domain(format!("need 0 <= alpha < beta < 1, got [{alpha}, {beta}]"));
    }
    if !(0.0 < t0 && t0 < t1 && t1.is_finite()) {
        return domain(format!("need 0 < t0 < t1, got [{t0}, {t1}]"));
    }
    Ok(())
}

/// Explicit Lipschitz constant `C` with `|a₂ - a₁| ≤ C |μ(a₂,t) - μ(a₁,t)|`
/// on `[alpha, beta] × [t0, t1]`, for the profiles where one is known.
pub fn stability_constant(profile: &InitialProfile, alpha: f64, beta: f64, t0: f64, t1: f64) -> Result<f64> {
    check_window(alpha, beta, t0, t1)?;
    let j1 = zero_j0(1)?;
    let growth = (0.25 * j1 * j1 * t1 / (1.0 - beta)).exp();
    match profile {
        InitialProfile::ConstOne => Ok(growth / t0),
        InitialProfile::OneMinusX => Ok(std::f64::consts::PI.powi(2) / 16.0 * growth),
        InitialProfile::X => Ok(j1 * j1 * growth),
        other => Err(Error::Unsupported(format!(
            "no explicit stability constant for u0 = {other}; use lipschitz_audit for an empirical one"
        ))),
    }
}

/// Diagnostic time `t̄(L) = 4(1-β)²/(j₁² δ) (L - j₁ J₀'(j₁) ‖u₀'‖)`, where
/// `δ = min |U₁(a)|` over `[0, beta]` (sampled on 257 points).
///
/// Past `t̄` the derivative `∂_a μ` is bounded away from zero by the first
/// mode; this is a sufficient-condition estimate, not a sharp threshold.
pub fn threshold_time(model: &TraceModel<'_>, beta: f64, lipschitz: f64) -> Result<f64> {
    if !(0.0 < beta && beta < 1.0) {
        return domain(format!("beta must lie in (0, 1), got {beta}"));
    }
    let n = 257;
    let floor = map_indexed(Execution::default(), n, |k| {
        let a = beta * k as f64 / (n - 1) as f64;
        weight(&WeightRequest::new(model.profile, a, 1, model.table)).map(f64::abs)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?
    .into_iter()
    .fold(f64::INFINITY, f64::min);
    if floor <= 0.0 {
        return domain("first weight vanishes on [0, beta]; no threshold exists");
    }
    let j1 = model.table.zero(1);
    let dj1 = model.table.deriv(1);
    Ok(4.0 * (1.0 - beta).powi(2) / (j1 * j1 * floor)
        * (lipschitz - j1 * dj1 * model.profile.deriv_sup_norm()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditPair {
    pub a1: f64,
    pub a2: f64,
    pub t: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub interval: (f64, f64),
    pub time_window: (f64, f64),
    pub constant_formula: Option<f64>,
    pub constant_empirical: f64,
    pub worst_pair: AuditPair,
    pub pairs_tested: usize,
    pub pairs_skipped: usize,
    /// Pairs whose ratio exceeds the explicit constant.
    pub violations: usize,
    pub satisfied: Option<bool>,
}

pub fn lipschitz_audit(
    model: &TraceModel<'_>,
    (alpha, beta): (f64, f64),
    (t0, t1): (f64, f64),
    n_pairs: usize,
    seed: u64,
) -> Result<StabilityReport> {
    lipschitz_audit_with(
        model,
        (alpha, beta),
        (t0, t1),
        n_pairs,
        seed,
        Execution::default(),
    )
}

/// Sample `(a₁, a₂, t)` uniformly and record `|a₂ - a₁| / |μ(a₂,t) - μ(a₁,t)|`.
pub fn lipschitz_audit_with(
    model: &TraceModel<'_>,
    (alpha, beta): (f64, f64),
    (t0, t1): (f64, f64),
    n_pairs: usize,
    seed: u64,
    exec: Execution,
) -> Result<StabilityReport> {
    check_window(alpha, beta, t0, t1)?;
    if n_pairs == 0 {
        return domain("n_pairs must be positive");
    }
    let formula = match stability_constant(model.profile, alpha, beta, t0, t1) {
        Ok(c) => Some(c),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let triples: Vec<(f64, f64, f64)> = (0..n_pairs)
        .map(|_| loop {
            let a1 = rng.random_range(alpha..=beta);
            let a2 = rng.random_range(alpha..=beta);
            let t = rng.random_range(t0..=t1);
            if a1 != a2 {
                break (a1, a2, t);
            }
        })
        .collect();

    let gap_floor = 10.0 * model.policy.tail_tol;
    let ratios = map_slice(exec, &triples, |&(a1, a2, t)| -> Result<Option<AuditPair>> {
        let gap = (model.mu(a2, t)? - model.mu(a1, t)?).abs();
        Ok((gap >= gap_floor).then(|| AuditPair {
            a1,
            a2,
            t,
            ratio: (a2 - a1).abs() / gap,
        }))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let tested: Vec<AuditPair> = ratios.iter().flatten().copied().collect();
    let skipped = n_pairs - tested.len();
    let worst = tested
        .iter()
        .copied()
        .max_by(|x, y| x.ratio.total_cmp(&y.ratio))
        .ok_or(Error::DegenerateAudit { skipped })?;
    let violations = formula.map_or(0, |c| tested.iter().filter(|p| p.ratio > c).count());
    Ok(StabilityReport {
        interval: (alpha, beta),
        time_window: (t0, t1),
        constant_formula: formula,
        constant_empirical: worst.ratio,
        worst_pair: worst,
        pairs_tested: tested.len(),
        pairs_skipped: skipped,
        violations,
        satisfied: formula.map(|c| worst.ratio <= c),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    pub t: f64,
    pub grid: Vec<f64>,
    pub mu: Vec<f64>,
    pub dmu_da: Vec<f64>,
    /// Grid cells `[a_k, a_{k+1}]` across which `∂_a μ` changes sign.
    pub sign_changes: Vec<(f64, f64)>,
    pub monotone: bool,
    pub direction: Option<Direction>,
}

pub fn monotonicity_scan(
    model: &TraceModel<'_>,
    t: f64,
    a_lo: f64,
    a_hi: f64,
    n_grid: usize,
) -> Result<MonotonicityReport> {
    monotonicity_scan_with(model, t, a_lo, a_hi, n_grid, Execution::default())
}

/// Tabulate `μ` and `∂_a μ` on an inclusive uniform grid and locate sign changes.
pub fn monotonicity_scan_with(
    model: &TraceModel<'_>,
    t: f64,
    a_lo: f64,
    a_hi: f64,
    n_grid: usize,
    exec: Execution,
) -> Result<MonotonicityReport> {
    if !(0.0 <= a_lo && a_lo < a_hi && a_hi < 1.0) {
        return domain(format!("need 0 <= a_lo < a_hi < 1, got [{a_lo}, {a_hi}]"));
    }
    if n_grid < 8 {
        return domain(format!("n_grid must be at least 8, got {n_grid}"));
    }
    model.policy.check_time(t)?;
    let grid: Vec<f64> = (0..n_grid)
        .map(|k| a_lo + (a_hi - a_lo) * k as f64 / (n_grid - 1) as f64)
        .collect();
    let vals = map_slice(exec, &grid, |&a| -> Result<(f64, f64)> {
        let mut ev = model.evaluator(a)?;
        Ok((ev.trace(t)?.value, ev.trace_da(t)?.value))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let (mu, dmu_da): (Vec<f64>, Vec<f64>) = vals.into_iter().unzip();

    let mut sign_changes = Vec::new();
    let mut last: Option<(usize, f64)> = None;
    for (k, &d) in dmu_da.iter().enumerate() {
        if d == 0.0 {
            continue;
        }
        if let Some((i, s)) = last {
            if s != d.signum() {
                sign_changes.push((grid[i], grid[k]));
            }
        }
        last = Some((k, d.signum()));
    }
    let monotone = sign_changes.is_empty();
    let direction = match (monotone, last) {
        (true, Some((_, s))) if s > 0.0 => Some(Direction::Increasing),
        (true, Some(_)) => Some(Direction::Decreasing),
        _ => None,
    };
    Ok(MonotonicityReport {
        t,
        grid,
        mu,
        dmu_da,
        sign_changes,
        monotone,
        direction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::build_table;

    #[test]
    fn explicit_constants() {
        let j1 = zero_j0(1).unwrap();
        let g = (0.25 * j1 * j1 * 2.0).exp();
        let c = stability_constant(&InitialProfile::ConstOne, 0.1, 0.5, 0.05, 1.0).unwrap();
        assert!((c - 20.0 * g).abs() <= 1e-12 * c);
        let c = stability_constant(&InitialProfile::OneMinusX, 0.1, 0.5, 0.05, 1.0).unwrap();
        assert!((c - std::f64::consts::PI.powi(2) / 16.0 * g).abs() <= 1e-12 * c);
        let c = stability_constant(&InitialProfile::X, 0.1, 0.5, 0.05, 1.0).unwrap();
        assert!((c - j1 * j1 * g).abs() <= 1e-12 * c);
        assert!(matches!(
            stability_constant(&InitialProfile::XOneMinusX, 0.1, 0.5, 0.05, 1.0),
            Err(Error::Unsupported(_))
        ));
        assert!(stability_constant(&InitialProfile::ConstOne, 0.5, 0.1, 0.05, 1.0).is_err());
        assert!(stability_constant(&InitialProfile::ConstOne, 0.1, 0.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn audit_is_seeded_and_bounded() {
        let table = build_table(300).unwrap();
        let p = InitialProfile::ConstOne;
        let model = TraceModel::new(&p, &table);
        let r = lipschitz_audit(&model, (0.1, 0.5), (0.05, 1.0), 20, 3).unwrap();
        assert_eq!(r.pairs_tested + r.pairs_skipped, 20);
        assert_eq!(r.satisfied, Some(true));
        let s = lipschitz_audit_with(&model, (0.1, 0.5), (0.05, 1.0), 20, 3, Execution::Sequential).unwrap();
        assert_eq!(r, s);
    }

    #[test]
    fn audit_without_formula_reports_empirical_only() {
        let table = build_table(300).unwrap();
        let p = InitialProfile::XOneMinusX;
        let model = TraceModel::new(&p, &table);
        let r = lipschitz_audit(&model, (0.3, 0.6), (1.5, 2.5), 10, 1).unwrap();
        assert_eq!(r.satisfied, None);
        assert!(r.constant_empirical > 0.0);
    }

    #[test]
    fn scan_detects_constant_profile_monotone() {
        let table = build_table(300).unwrap();
        let p = InitialProfile::ConstOne;
        let model = TraceModel::new(&p, &table);
        let r = monotonicity_scan(&model, 1.0, 0.05, 0.9, 16).unwrap();
        assert!(r.monotone);
        assert_eq!(r.direction, Some(Direction::Increasing));
        assert!(monotonicity_scan(&model, 1.0, 0.05, 0.9, 4).is_err());
        assert!(monotonicity_scan(&model, 1.0, 0.9, 0.05, 16).is_err());
    }

    #[test]
    fn threshold_grows_with_target() {
        let table = build_table(300).unwrap();
        let p = InitialProfile::ConstOne;
        let model = TraceModel::new(&p, &table);
        let t1 = threshold_time(&model, 0.5, 10.0).unwrap();
        let t2 = threshold_time(&model, 0.5, 20.0).unwrap();
        assert!(t2 > t1 && t1 > 0.0);
    }
}
