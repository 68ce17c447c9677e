use serde::{Deserialize, Serialize};

use super::{cost, ObservationSet, TraceModel};
use crate::error::{Error, Result};
use crate::parallel::{map_slice, Execution};

/// Costs at or below this are treated as an exact fit.
pub const COST_FLOOR: f64 = 1e-24;

const GOLDEN: f64 = 1.618_033_988_749_895;
const CGOLD: f64 = 0.381_966_011_250_105_2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    /// Admissible margin: `a ∈ (delta, 1 - delta)`.
    pub delta: f64,
    pub a_init: f64,
    /// Total number of starts, `a_init` included; the rest are equispaced.
    pub multistart: usize,
    pub tol_a: f64,
    /// Cap on cost evaluations per start.
    pub max_iters: usize,
    pub use_derivative: bool,
    pub execution: Execution,
}

impl Default for InversionConfig {
    fn default() -> Self {
        Self {
            delta: 0.01,
            a_init: 0.5,
            multistart: 9,
            tol_a: 1e-10,
            max_iters: 200,
            use_derivative: false,
            execution: Execution::default(),
        }
    }
}

impl InversionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::Config(format!(
                "delta must lie in (0, 0.5), got {}",
                self.delta
            )));
        }
        if !(self.a_init > self.delta && self.a_init < 1.0 - self.delta) {
            return Err(Error::Config(format!(
                "a_init = {} is outside the admissible interval ({}, {})",
                self.a_init,
                self.delta,
                1.0 - self.delta
            )));
        }
        if self.multistart == 0 || self.max_iters == 0 {
            return Err(Error::Config("multistart and max_iters must be positive".into()));
        }
        if !(self.tol_a > 0.0 && self.tol_a.is_finite()) {
            return Err(Error::Config(format!(
                "tol_a must be positive, got {}",
                self.tol_a
            )));
        }
        Ok(())
    }

    pub fn starts(&self) -> Vec<f64> {
        let (lo, hi) = (self.delta, 1.0 - self.delta);
        let m = self.multistart;
        std::iter::once(self.a_init)
            .chain((1..m).map(|k| lo + (hi - lo) * k as f64 / m as f64))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Iterate {
    pub a: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: f64,
    pub a: f64,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InversionResult {
    pub a_hat: f64,
    pub cost: f64,
    pub iterations: usize,
    /// Every evaluation of the winning start, in order.
    pub history: Vec<Iterate>,
    pub converged: bool,
    /// Distinct near-optimal minima across starts, ordered by `(cost, a)`.
    pub all_minima: Vec<Iterate>,
    pub starts: Vec<StartOutcome>,
}

struct LocalRun {
    best: Iterate,
    history: Vec<Iterate>,
    converged: bool,
}

impl LocalRun {
    fn iterations(&self) -> usize {
        self.history.len().saturating_sub(1)
    }
}

struct Tracker<F> {
    f: F,
    history: Vec<Iterate>,
    max_evals: usize,
}

impl<F: FnMut(f64) -> Result<(f64, f64)>> Tracker<F> {
    fn eval(&mut self, a: f64) -> Result<(f64, f64)> {
        let (c, d) = (self.f)(a)?;
        self.history.push(Iterate { a, cost: c });
        Ok((c, d))
    }

    fn cost(&mut self, a: f64) -> Result<f64> {
        Ok(self.eval(a)?.0)
    }

    fn exhausted(&self) -> bool {
        self.history.len() > self.max_evals
    }

    fn finish(self, converged: bool) -> LocalRun {
        let best = self
            .history
            .iter()
            .copied()
            .min_by(|x, y| x.cost.total_cmp(&y.cost).then(x.a.total_cmp(&y.a)))
            .expect("at least one evaluation");
        self.finish_at(best, converged)
    }

    fn finish_at(self, best: Iterate, converged: bool) -> LocalRun {
        LocalRun {
            best,
            history: self.history,
            converged,
        }
    }
}

/// Bracket a local minimum downhill from `x0` inside `[lo, hi]`.
/// Returns `(left, right, best)`; `None` when the floor was hit.
fn bracket<F: FnMut(f64) -> Result<(f64, f64)>>(
    tr: &mut Tracker<F>,
    x0: f64,
    f0: f64,
    lo: f64,
    hi: f64,
) -> Result<Option<(f64, f64, f64)>> {
    let mut step = 0.02 * (hi - lo);
    let xl = (x0 - step).max(lo);
    let xr = (x0 + step).min(hi);
    let fl = tr.cost(xl)?;
    let fr = tr.cost(xr)?;
    if fl.min(fr) <= COST_FLOOR {
        return Ok(None);
    }
    if fl >= f0 && fr >= f0 {
        return Ok(Some((xl, xr, x0)));
    }
    let (dir, mut b, mut fb) = if fr < fl { (1.0, xr, fr) } else { (-1.0, xl, fl) };
    let mut p = x0;
    loop {
        step *= GOLDEN;
        let c = (b + dir * step).clamp(lo, hi);
        if c == b || tr.exhausted() {
            return Ok(Some((p.min(b), p.max(b), b)));
        }
        let fc = tr.cost(c)?;
        if fc <= COST_FLOOR {
            return Ok(None);
        }
        if fc >= fb {
            return Ok(Some((p.min(c), p.max(c), b)));
        }
        p = b;
        b = c;
        fb = fc;
    }
}

/// Golden-section / successive-parabolic minimisation on a bracket.
fn brent<F: FnMut(f64) -> Result<(f64, f64)>>(
    tr: &mut Tracker<F>,
    (mut lo, mut hi, x0): (f64, f64, f64),
    fx0: f64,
    tol_a: f64,
) -> Result<bool> {
    let (mut x, mut w, mut v) = (x0, x0, x0);
    let (mut fx, mut fw, mut fv) = (fx0, fx0, fx0);
    let (mut d, mut e) = (0.0f64, 0.0f64);
    let tol1 = 0.25 * tol_a;
    let tol2 = 2.0 * tol1;
    loop {
        let xm = 0.5 * (lo + hi);
        if (x - xm).abs() <= tol2 - 0.5 * (hi - lo) || fx <= COST_FLOOR {
            return Ok(true);
        }
        if tr.exhausted() {
            return Ok(false);
        }
        let golden = |x: f64| if x >= xm { lo - x } else { hi - x };
        if e.abs() > tol1 {
            let r = (x - w) * (fx - fv);
            let mut q = (x - v) * (fx - fw);
            let mut p = (x - v) * q - (x - w) * r;
            q = 2.0 * (q - r);
            if q > 0.0 {
                p = -p;
            }
            q = q.abs();
            let etemp = e;
            e = d;
            if p.abs() >= (0.5 * q * etemp).abs() || p <= q * (lo - x) || p >= q * (hi - x) {
                e = golden(x);
                d = CGOLD * e;
            } else {
                d = p / q;
                let u = x + d;
                if u - lo < tol2 || hi - u < tol2 {
                    d = tol1.copysign(xm - x);
                }
            }
        } else {
            e = golden(x);
            d = CGOLD * e;
        }
        let u = if d.abs() >= tol1 {
            x + d
        } else {
            x + tol1.copysign(d)
        };
        let fu = tr.cost(u)?;
        if fu <= fx {
            if u >= x {
                lo = x;
            } else {
                hi = x;
            }
            (v, w, x) = (w, x, u);
            (fv, fw, fx) = (fw, fx, fu);
        } else {
            if u < x {
                lo = u;
            } else {
                hi = u;
            }
            if fu <= fw || w == x {
                (v, w) = (w, u);
                (fv, fw) = (fw, fu);
            } else if fu <= fv || v == x || v == w {
                v = u;
                fv = fu;
            }
        }
    }
}

/// Bisection on `J'` across a bracket where it changes sign. Returns the
/// final midpoint and whether the bracket shrank below `tol_a`.
fn bisect_gradient<F: FnMut(f64) -> Result<(f64, f64)>>(
    tr: &mut Tracker<F>,
    (mut lo, mut hi): (f64, f64),
    tol_a: f64,
) -> Result<Option<(Iterate, bool)>> {
    let (_, dlo) = tr.eval(lo)?;
    let (_, dhi) = tr.eval(hi)?;
    if !(dlo < 0.0 && dhi > 0.0) {
        return Ok(None);
    }
    loop {
        let mid = 0.5 * (lo + hi);
        let (c, d) = tr.eval(mid)?;
        let here = Iterate { a: mid, cost: c };
        if c <= COST_FLOOR || d == 0.0 || hi - lo <= tol_a {
            return Ok(Some((here, true)));
        }
        if tr.exhausted() {
            return Ok(Some((here, false)));
        }
        if d > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
}

fn local_search<F: FnMut(f64) -> Result<(f64, f64)>>(
    f: F,
    x0: f64,
    cfg: &InversionConfig,
) -> Result<LocalRun> {
    let (lo, hi) = (cfg.delta, 1.0 - cfg.delta);
    let mut tr = Tracker {
        f,
        history: Vec::new(),
        max_evals: cfg.max_iters,
    };
    let f0 = tr.cost(x0)?;
    if f0 <= COST_FLOOR {
        return Ok(tr.finish(true));
    }
    let Some((l, r, b)) = bracket(&mut tr, x0, f0, lo, hi)? else {
        return Ok(tr.finish(true));
    };
    if cfg.use_derivative {
        if let Some((end, conv)) = bisect_gradient(&mut tr, (l, r), cfg.tol_a)? {
            return Ok(tr.finish_at(end, conv));
        }
    }
    let fb = tr
        .history
        .iter()
        .rev()
        .find(|it| it.a == b)
        .map(|it| it.cost)
        .unwrap_or(f0);
    let conv = brent(&mut tr, (l, r, b), fb, cfg.tol_a)?;
    Ok(tr.finish(conv))
}

/// Evaluate `J` and, when asked, `J'` in one pass over the observations.
fn cost_pair(
    model: &TraceModel<'_>,
    a: f64,
    obs: &ObservationSet,
    with_derivative: bool,
) -> Result<(f64, f64)> {
    if !with_derivative {
        return Ok((cost(model, a, obs)?, 0.0));
    }
    let mut ev = model.evaluator(a)?;
    let (mut c, mut d) = (0.0, 0.0);
    for (&t, &beta) in obs.times.iter().zip(&obs.values) {
        let r = beta - ev.trace(t)?.value;
        c += r * r;
        d -= r * ev.trace_da(t)?.value;
    }
    Ok((0.5 * c, d))
}

/// Multistart bracketed minimisation of `J` over `(delta, 1 - delta)`.
pub fn minimize(
    model: &TraceModel<'_>,
    obs: &ObservationSet,
    cfg: &InversionConfig,
) -> Result<InversionResult> {
    cfg.validate()?;
    obs.validate()?;
    let starts = cfg.starts();
    let runs = map_slice(cfg.execution, &starts, |&s| {
        local_search(|a| cost_pair(model, a, obs, cfg.use_derivative), s, cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    // Costs under the floor are indistinguishable and tie.
    let order = |x: &Iterate, y: &Iterate| {
        x.cost
            .max(COST_FLOOR)
            .total_cmp(&y.cost.max(COST_FLOOR))
            .then(x.a.total_cmp(&y.a))
    };
    let winner = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.converged)
        .min_by(|(_, x), (_, y)| order(&x.best, &y.best))
        .or_else(|| {
            runs.iter()
                .enumerate()
                .min_by(|(_, x), (_, y)| order(&x.best, &y.best))
        })
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Internal("no start produced a result".into()))?;

    let max_cost = runs
        .iter()
        .flat_map(|r| r.history.iter().map(|it| it.cost))
        .fold(0.0f64, f64::max);
    let best_cost = runs[winner].best.cost;
    let cutoff = best_cost + 1e-6 * (1.0 + max_cost);
    let mut minima: Vec<Iterate> = runs
        .iter()
        .map(|r| r.best)
        .filter(|it| it.cost <= cutoff)
        .collect();
    minima.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut all_minima: Vec<Iterate> = Vec::new();
    for m in minima {
        match all_minima.last_mut() {
            Some(last) if (m.a - last.a).abs() <= 1e-6 => {
                if order(&m, last).is_lt() {
                    *last = m;
                }
            }
            _ => all_minima.push(m),
        }
    }
    all_minima.sort_by(order);

    let start_outcomes = starts
        .iter()
        .zip(&runs)
        .map(|(&start, r)| StartOutcome {
            start,
            a: r.best.a,
            cost: r.best.cost,
            iterations: r.iterations(),
            converged: r.converged,
        })
        .collect();
    let w = &runs[winner];
    Ok(InversionResult {
        a_hat: w.best.a,
        cost: cost(model, w.best.a, obs)?,
        iterations: w.iterations(),
        history: w.history.clone(),
        converged: w.converged,
        all_minima,
        starts: start_outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64, x0: f64, use_derivative: bool) -> LocalRun {
        let cfg = InversionConfig {
            a_init: x0,
            use_derivative,
            ..InversionConfig::default()
        };
        local_search(|a| Ok((f(a), df(a))), x0, &cfg).unwrap()
    }

    #[test]
    fn quadratic_minimum_located() {
        for use_d in [false, true] {
            for &x0 in &[0.1, 0.5, 0.9] {
                let r = run(|a| 3.0 * (a - 0.37).powi(2), |a| 6.0 * (a - 0.37), x0, use_d);
                assert!(r.converged);
                assert!((r.best.a - 0.37).abs() < 1e-9, "{} from {x0}", r.best.a);
            }
        }
    }

    #[test]
    fn gradient_mode_resolves_offset_minimum() {
        // with a nonzero floor, values alone only locate the minimum to ~sqrt(eps)
        let r = run(|a| (a - 0.37).powi(2) + 1.0, |a| 2.0 * (a - 0.37), 0.8, true);
        assert!(r.converged);
        assert!((r.best.a - 0.37).abs() < 1e-9);
        let r = run(|a| (a - 0.37).powi(2) + 1.0, |a| 2.0 * (a - 0.37), 0.8, false);
        assert!((r.best.a - 0.37).abs() < 1e-7);
    }

    #[test]
    fn quartic_with_flat_bottom() {
        let r = run(
            |a| (a - 0.6).powi(4) + 0.5,
            |a| 4.0 * (a - 0.6).powi(3),
            0.2,
            false,
        );
        assert!(r.converged);
        assert!((r.best.a - 0.6).abs() < 1e-3);
    }

    #[test]
    fn boundary_minimum_is_reached() {
        let r = run(|a| a, |_| 1.0, 0.5, false);
        assert!(r.best.a < 0.01 + 1e-9);
        assert!(r.best.a >= 0.01);
    }

    #[test]
    fn exact_start_stops_immediately() {
        let r = run(|a| (a - 0.3).powi(2), |a| 2.0 * (a - 0.3), 0.3, false);
        assert_eq!(r.iterations(), 0);
        assert!(r.converged);
    }

    #[test]
    fn iteration_cap_reports_non_convergence() {
        let cfg = InversionConfig {
            a_init: 0.2,
            max_iters: 3,
            ..InversionConfig::default()
        };
        let r = local_search(|a| Ok(((a - 0.77f64).powi(2) + 1.0, 0.0)), 0.2, &cfg).unwrap();
        assert!(!r.converged);
    }

    #[test]
    fn config_validation_and_starts() {
        let cfg = InversionConfig::default();
        assert!(cfg.validate().is_ok());
        let s = cfg.starts();
        assert_eq!(s.len(), 9);
        assert_eq!(s[0], 0.5);
        assert!(s.iter().all(|&a| a > cfg.delta && a < 1.0 - cfg.delta));
        for bad in [
            InversionConfig { a_init: 0.005, ..cfg },
            InversionConfig { delta: 0.5, ..cfg },
            InversionConfig { multistart: 0, ..cfg },
            InversionConfig { tol_a: 0.0, ..cfg },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }
}
