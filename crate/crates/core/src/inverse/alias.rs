use super::TraceModel;
use crate::bessel::BesselTable;
use crate::error::{domain, Result};
use crate::parallel::{map_slice, Execution};

const ROOT_TOL: f64 = 1e-10;

/// The point `a₂` whose `m2`-th eigenvalue equals the `m1`-th eigenvalue at `a1`:
/// `a₂ = 1 - (1 - a₁) j_{m2}² / j_{m1}²`. `None` when that leaves `(0, 1)`.
pub fn alias_pair(table: &BesselTable, a1: f64, m1: usize, m2: usize) -> Result<Option<f64>> {
    if !(a1 > 0.0 && a1 < 1.0) {
        return domain(format!("a1 must lie in (0, 1), got {a1}"));
    }
    let cap = table.capacity();
    if m1 == 0 || m2 == 0 || m1 > cap || m2 > cap {
        return domain(format!("mode indices must lie in 1..={cap}, got ({m1}, {m2})"));
    }
    if m1 == m2 {
        return Ok(Some(a1));
    }
    let ratio = table.zero(m2) / table.zero(m1);
    let a2 = 1.0 - (1.0 - a1) * ratio * ratio;
    Ok((a2 > 0.0 && a2 < 1.0).then_some(a2))
}

fn grid(delta: f64, n_grid: usize) -> Vec<f64> {
    (0..n_grid)
        .map(|k| delta + (1.0 - 2.0 * delta) * k as f64 / (n_grid - 1) as f64)
        .collect()
}

fn check_args(model: &TraceModel<'_>, t0: f64, delta: f64, n_grid: usize) -> Result<()> {
    model.policy.check_time(t0)?;
    if !(delta > 0.0 && delta < 0.5) {
        return domain(format!("delta must lie in (0, 0.5), got {delta}"));
    }
    if n_grid < 2 {
        return domain(format!("n_grid must be at least 2, got {n_grid}"));
    }
    Ok(())
}

pub fn observation_collision(
    model: &TraceModel<'_>,
    t0: f64,
    beta: f64,
    delta: f64,
    n_grid: usize,
) -> Result<Vec<f64>> {
    observation_collision_with(model, t0, beta, delta, n_grid, Execution::default())
}

/// All `a ∈ [delta, 1 - delta]` with `μ(a, t0) = beta`, ascending.
pub fn observation_collision_with(
    model: &TraceModel<'_>,
    t0: f64,
    beta: f64,
    delta: f64,
    n_grid: usize,
    exec: Execution,
) -> Result<Vec<f64>> {
    check_args(model, t0, delta, n_grid)?;
    let g = |a: f64| model.mu(a, t0).map(|m| m - beta);
    let xs = grid(delta, n_grid);
    let gs = map_slice(exec, &xs, |&a| g(a))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;

    let mut exact: Vec<f64> = xs
        .iter()
        .zip(&gs)
        .filter(|(_, &v)| v == 0.0)
        .map(|(&a, _)| a)
        .collect();
    let cells: Vec<usize> = (0..n_grid - 1)
        .filter(|&k| gs[k] != 0.0 && gs[k + 1] != 0.0 && gs[k].signum() != gs[k + 1].signum())
        .collect();
    let roots = map_slice(exec, &cells, |&k| -> Result<f64> {
        let (mut lo, mut hi) = (xs[k], xs[k + 1]);
        let neg_at_lo = gs[k] < 0.0;
        while hi - lo > ROOT_TOL {
            let mid = 0.5 * (lo + hi);
            let v = g(mid)?;
            if v == 0.0 {
                return Ok(mid);
            }
            if (v < 0.0) == neg_at_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    exact.extend(roots);
    exact.sort_by(f64::total_cmp);
    Ok(exact)
}

/// A level `β` hit at least twice by `a ↦ μ(a, t0)` on `[delta, 1 - delta]`:
/// halfway between an interior global extremum and the nearer endpoint value.
/// `None` when the sampled trace is monotone.
pub fn collision_level(model: &TraceModel<'_>, t0: f64, delta: f64, n_grid: usize) -> Result<Option<f64>> {
    check_args(model, t0, delta, n_grid)?;
    let xs = grid(delta, n_grid);
    let mu = map_slice(Execution::default(), &xs, |&a| model.mu(a, t0))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let last = n_grid - 1;
    let (kmin, &vmin) = mu
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty grid");
    let (kmax, &vmax) = mu
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.total_cmp(y.1))
        .expect("nonempty grid");
    let ends = (mu[0], mu[last]);
    if kmin != 0 && kmin != last {
        return Ok(Some(0.5 * (vmin + ends.0.min(ends.1))));
    }
    if kmax != 0 && kmax != last {
        return Ok(Some(0.5 * (vmax + ends.0.max(ends.1))));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::build_table;
    use crate::initial_data::InitialProfile;

    #[test]
    fn alias_examples() {
        let table = build_table(10).unwrap();
        assert_eq!(alias_pair(&table, 0.35, 3, 3).unwrap(), Some(0.35));
        let a2 = alias_pair(&table, 0.35, 2, 1).unwrap().unwrap();
        assert!((a2 - 0.8766).abs() < 1e-4);
        assert_eq!(alias_pair(&table, 0.35, 1, 2).unwrap(), None);
        assert!(alias_pair(&table, 0.0, 1, 2).is_err());
        assert!(alias_pair(&table, 0.5, 1, 11).is_err());
    }

    #[test]
    fn monotone_trace_has_single_root() {
        let table = build_table(300).unwrap();
        let p = InitialProfile::ConstOne;
        let model = TraceModel::new(&p, &table);
        let beta = model.mu(0.42, 1.0).unwrap();
        let roots = observation_collision(&model, 1.0, beta, 0.01, 64).unwrap();
        assert_eq!(roots.len(), 1);
        assert!((roots[0] - 0.42).abs() < 1e-8);
        assert_eq!(collision_level(&model, 1.0, 0.01, 64).unwrap(), None);
        assert!(observation_collision(&model, 1.0, 5.0, 0.01, 64)
            .unwrap()
            .is_empty());
    }
}
