//! Finite-volume solver for `u_t = ((x - a) u_x)_x` on `(a, 1)` with
//! `u(1, t) = 0`, used to cross-check the spectral series.
//!
//! Cell-centred grid of `nx` cells on `(a, 1)`. The face flux is
//! `F_{i+1/2} = (x_{i+1/2} - a)(u_{i+1} - u_i)/h`; at the face `x = a` the
//! coefficient is exactly zero, which is the weighted Neumann condition
//! `(x - a) u_x = 0` with no ghost cell. The Dirichlet value sits on the face
//! `x = 1`, half a cell from the last centre, and the outer flux comes from
//! the quadratic through it and the last two centres (the same stencil as
//! the reported trace). A two-point closure there is only first order,
//! because `u_xx` does not vanish at `x = 1` for this operator. Time stepping
//! is implicit (backward Euler or Crank–Nicolson with a four half-step
//! backward-Euler start), each step one tridiagonal solve.

use crate::error::{domain, Error, Result};
use crate::initial_data::InitialProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Scheme {
    BackwardEuler,
    CrankNicolson,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FdConfig {
    pub nx: usize,
    pub nt: usize,
    pub scheme: Scheme,
    pub t_end: f64,
    /// Store every `snapshot_stride`-th time level in `values`; the trace is
    /// kept at every step regardless.
    pub snapshot_stride: usize,
}

impl Default for FdConfig {
    fn default() -> Self {
        Self {
            nx: 800,
            nt: 2000,
            scheme: Scheme::CrankNicolson,
            t_end: 1.0,
            snapshot_stride: 1,
        }
    }
}

impl FdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nx < 16 || self.nt < 16 {
            return Err(Error::Config(format!(
                "nx and nt must be at least 16, got nx={} nt={}",
                self.nx, self.nt
            )));
        }
        if !(self.t_end > 0.0) || !self.t_end.is_finite() {
            return Err(Error::Config(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(Error::Config("snapshot_stride must be positive".into()));
        }
        Ok(())
    }
}

/// Anything that can be sampled as an initial datum.
pub trait InitialDatum: Sync {
    fn at(&self, x: f64) -> f64;
}

impl InitialDatum for InitialProfile {
    fn at(&self, x: f64) -> f64 {
        self.value(x)
    }
}

impl<F: Fn(f64) -> f64 + Sync> InitialDatum for F {
    fn at(&self, x: f64) -> f64 {
        self(x)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdSolution {
    /// Cell centres in increasing `x`, plus the Dirichlet node at the outer
    /// boundary (last entry for the right problem, first for the left one).
    pub grid: Vec<f64>,
    /// All step times `0, dt, …, t_end`.
    pub times: Vec<f64>,
    /// Stored time levels, aligned with `snapshot_times`; each row matches
    /// `grid`.
    pub values: Vec<Vec<f64>>,
    pub snapshot_times: Vec<f64>,
    /// `u_x` at the Dirichlet boundary for every entry of `times`.
    pub trace_series: Vec<f64>,
    cell_width: f64,
}

impl FdSolution {
    /// Discrete `L²` norm of stored snapshot `k`.
    pub fn l2_norm(&self, k: usize) -> f64 {
        let sum: f64 = self.values[k].iter().map(|u| u * u).sum();
        (self.cell_width * sum).sqrt()
    }
}

struct Tridiagonal {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl Tridiagonal {
    /// The operator `A` with `du/dt = A u` on `nx` cells of width `h`
    /// covering `(0, L)` in the distance-to-degeneracy variable.
    fn operator(nx: usize, h: f64) -> Self {
        let mut lower = vec![0.0; nx];
        let mut diag = vec![0.0; nx];
        let mut upper = vec![0.0; nx];
        let inv = 1.0 / h;
        for i in 0..nx {
            // face coefficients are z_{i±1/2} = (i+1)h, ih; divided by h² gives (i+1)/h, i/h
            let left = i as f64 * inv;
            lower[i] = left;
            if i + 1 < nx {
                let right = (i + 1) as f64 * inv;
                diag[i] = -(left + right);
                upper[i] = right;
            } else {
                // outer flux L u_z(L) from the quadratic through u = 0 on the face
                // and the last two centres: L (-3 u_{N-1} + u_{N-2} / 3) / h
                let n = nx as f64 * inv;
                diag[i] = -left - 3.0 * n;
                lower[i] = left + n / 3.0;
            }
        }
        Self { lower, diag, upper }
    }

    /// `I - c A`.
    fn implicit(&self, c: f64) -> Self {
        Self {
            lower: self.lower.iter().map(|v| -c * v).collect(),
            diag: self.diag.iter().map(|v| 1.0 - c * v).collect(),
            upper: self.upper.iter().map(|v| -c * v).collect(),
        }
    }

    /// `out = (I + c A) u`.
    fn explicit_apply(&self, c: f64, u: &[f64], out: &mut [f64]) {
        let n = u.len();
        for i in 0..n {
            let mut v = u[i] + c * self.diag[i] * u[i];
            if i > 0 {
                v += c * self.lower[i] * u[i - 1];
            }
            if i + 1 < n {
                v += c * self.upper[i] * u[i + 1];
            }
            out[i] = v;
        }
    }
}

/// Thomas factorisation of a diagonally dominant tridiagonal matrix.
struct Factored {
    lower: Vec<f64>,
    inv_pivot: Vec<f64>,
    upper_scaled: Vec<f64>,
}

impl Factored {
    fn new(m: &Tridiagonal) -> Result<Self> {
        let n = m.diag.len();
        let mut inv_pivot = vec![0.0; n];
        let mut upper_scaled = vec![0.0; n];
        let mut prev = 0.0;
        for i in 0..n {
            let pivot = m.diag[i] - if i > 0 { m.lower[i] * prev } else { 0.0 };
            if pivot.abs() < f64::MIN_POSITIVE || !pivot.is_finite() {
                return Err(Error::Internal(format!("singular tridiagonal pivot at row {i}")));
            }
            inv_pivot[i] = 1.0 / pivot;
            upper_scaled[i] = m.upper[i] * inv_pivot[i];
            prev = upper_scaled[i];
        }
        Ok(Self {
            lower: m.lower.clone(),
            inv_pivot,
            upper_scaled,
        })
    }

    fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        for i in 0..n {
            let carry = if i > 0 { self.lower[i] * rhs[i - 1] } else { 0.0 };
            rhs[i] = (rhs[i] - carry) * self.inv_pivot[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            rhs[i] -= self.upper_scaled[i] * rhs[i + 1];
        }
    }
}

/// Evolve `u_t = (z u_z)_z` on `(0, length)` with `u(length) = 0`; `datum`
/// is given in the distance variable `z`. Returns the snapshots, the
/// `u_z(length)` series and the cell width.
/// Leading Crank–Nicolson steps replaced by two backward-Euler half-steps each.
/// The boundary flux is a derivative of the solution, and damping its stiff
/// modes needs four half-steps rather than two.
const STARTUP_STEPS: usize = 2;

/// Snapshots, their times, the trace at every step, cell width.
type Evolution = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>, f64);

fn evolve<D: Fn(f64) -> f64>(datum: D, length: f64, cfg: &FdConfig) -> Result<Evolution> {
    cfg.validate()?;
    let nx = cfg.nx;
    let h = length / nx as f64;
    let dt = cfg.t_end / cfg.nt as f64;
    let op = Tridiagonal::operator(nx, h);

    let mut u: Vec<f64> = (0..nx).map(|i| datum((i as f64 + 0.5) * h)).collect();
    if u.iter().any(|v| !v.is_finite()) {
        return domain("initial datum is not finite on the grid");
    }
    let boundary_slope = |u: &[f64]| (-3.0 * u[nx - 1] + u[nx - 2] / 3.0) / h;

    let mut snapshots = vec![u.clone()];
    let mut snapshot_times = vec![0.0];
    let mut trace = Vec::with_capacity(cfg.nt + 1);
    trace.push(boundary_slope(&u));

    // I - dt/2 A serves both the CN step and the backward-Euler half-steps
    let half = Factored::new(&op.implicit(0.5 * dt))?;
    let full_be = Factored::new(&op.implicit(dt))?;
    let mut scratch = vec![0.0; nx];

    for step in 1..=cfg.nt {
        match cfg.scheme {
            Scheme::BackwardEuler => full_be.solve_in_place(&mut u),
            Scheme::CrankNicolson if step <= STARTUP_STEPS => {
                half.solve_in_place(&mut u);
                half.solve_in_place(&mut u);
            }
            Scheme::CrankNicolson => {
                op.explicit_apply(0.5 * dt, &u, &mut scratch);
                half.solve_in_place(&mut scratch);
                std::mem::swap(&mut u, &mut scratch);
            }
        }
        trace.push(boundary_slope(&u));
        if step % cfg.snapshot_stride == 0 || step == cfg.nt {
            snapshots.push(u.clone());
            snapshot_times.push(step as f64 * dt);
        }
    }
    if trace.iter().any(|v| !v.is_finite()) {
        return Err(Error::Internal("non-finite values in FD solution".into()));
    }
    Ok((snapshots, snapshot_times, trace, h))
}

fn check_a(a: f64) -> Result<()> {
    if !(0.0..=1.0 - 1e-3).contains(&a) {
        return domain(format!("degeneracy point must lie in [0, 0.999], got {a}"));
    }
    Ok(())
}

fn step_times(cfg: &FdConfig) -> Vec<f64> {
    let dt = cfg.t_end / cfg.nt as f64;
    (0..=cfg.nt).map(|k| k as f64 * dt).collect()
}

/// Solve the right problem on `(a, 1)`.
pub fn solve_fd<D: InitialDatum + ?Sized>(profile: &D, a: f64, cfg: &FdConfig) -> Result<FdSolution> {
    check_a(a)?;
    let (snapshots, snapshot_times, trace_series, h) = evolve(|z| profile.at(a + z), 1.0 - a, cfg)?;
    let mut grid: Vec<f64> = (0..cfg.nx).map(|i| a + (i as f64 + 0.5) * h).collect();
    grid.push(1.0);
    let values = snapshots
        .into_iter()
        .map(|mut row| {
            row.push(0.0);
            row
        })
        .collect();
    Ok(FdSolution {
        grid,
        times: step_times(cfg),
        values,
        snapshot_times,
        trace_series,
        cell_width: h,
    })
}

/// Solve both lateral problems of the full equation on `(0, 1)`: the left one
/// on `(0, a)` with `u(0, t) = 0` and the right one on `(a, 1)`. They do not
/// interact across the degeneracy, so each is an independent solve. The left
/// trace is `u_x(0, t)`.
pub fn solve_full<L, R>(
    profile_left: &L,
    profile_right: &R,
    a: f64,
    cfg: &FdConfig,
) -> Result<(FdSolution, FdSolution)>
where
    L: InitialDatum + ?Sized,
    R: InitialDatum + ?Sized,
{
    check_a(a)?;
    if a <= 0.0 {
        return domain("the left problem needs a > 0");
    }
    let right = solve_fd(profile_right, a, cfg)?;
    // reflect: z = a - x
    let (snapshots, snapshot_times, slope_z, h) = evolve(|z| profile_left.at(a - z), a, cfg)?;
    let mut grid = vec![0.0];
    grid.extend((0..cfg.nx).rev().map(|i| a - (i as f64 + 0.5) * h));
    let values = snapshots
        .into_iter()
        .map(|row| std::iter::once(0.0).chain(row.into_iter().rev()).collect())
        .collect();
    let left = FdSolution {
        grid,
        times: step_times(cfg),
        values,
        snapshot_times,
        trace_series: slope_z.into_iter().map(|s| -s).collect(),
        cell_width: h,
    };
    Ok((left, right))
}

/// Boundary flux at time `t`, linearly interpolated between steps.
pub fn trace_fd(sol: &FdSolution, t: f64) -> Result<f64> {
    let t_end = *sol.times.last().expect("solution has at least one time");
    if !(0.0..=t_end).contains(&t) {
        return domain(format!("time {t} outside the solved horizon [0, {t_end}]"));
    }
    let k = sol.times.partition_point(|&s| s <= t).saturating_sub(1);
    if k + 1 >= sol.times.len() {
        return Ok(sol.trace_series[sol.times.len() - 1]);
    }
    let (t0, t1) = (sol.times[k], sol.times[k + 1]);
    let w = (t - t0) / (t1 - t0);
    Ok((1.0 - w) * sol.trace_series[k] + w * sol.trace_series[k + 1])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bessel::build_table;
    use crate::spectral::{boundary_trace, eigenfunction_value, eigenvalue, TraceQuery};

    #[test]
    fn zero_datum_stays_zero() {
        let cfg = FdConfig {
            nx: 32,
            nt: 32,
            ..Default::default()
        };
        let sol = solve_fd(&|_x: f64| 0.0, 0.3, &cfg).unwrap();
        assert!(sol.values.iter().flatten().all(|&v| v == 0.0));
        assert_eq!(trace_fd(&sol, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn dirichlet_row_is_exact() {
        let cfg = FdConfig {
            nx: 64,
            nt: 64,
            ..Default::default()
        };
        let sol = solve_fd(&InitialProfile::ConstOne, 0.2, &cfg).unwrap();
        assert_eq!(*sol.grid.last().unwrap(), 1.0);
        assert!(sol.values.iter().all(|row| *row.last().unwrap() == 0.0));
    }

    #[test]
    fn sign_of_trace_for_positive_datum() {
        let cfg = FdConfig {
            nx: 200,
            nt: 400,
            t_end: 2.0,
            ..Default::default()
        };
        let sol = solve_fd(&InitialProfile::ConstOne, 0.35, &cfg).unwrap();
        for i in 0..=19 {
            let t = 0.1 + 0.1 * i as f64;
            assert!(trace_fd(&sol, t).unwrap() < 0.0);
        }
    }

    #[test]
    fn eigenmode_decay_rate() {
        let table = build_table(4).unwrap();
        let a = 0.35;
        let mode = |x: f64| eigenfunction_value(&table, 1, a, x.clamp(a, 1.0)).unwrap();
        let cfg = FdConfig {
            nx: 400,
            nt: 1000,
            ..Default::default()
        };
        let sol = solve_fd(&mode, a, &cfg).unwrap();
        let ratio = trace_fd(&sol, 1.0).unwrap() / trace_fd(&sol, 0.5).unwrap();
        let lambda = eigenvalue(&table, 1, a).unwrap();
        assert!((ratio - (-lambda * 0.5).exp()).abs() < 1e-3);
    }

    #[test]
    fn matches_series_for_const_one() {
        let table = build_table(2000).unwrap();
        let cfg = FdConfig {
            nx: 800,
            nt: 2000,
            ..Default::default()
        };
        let sol = solve_fd(&InitialProfile::ConstOne, 0.35, &cfg).unwrap();
        let fd = trace_fd(&sol, 1.0).unwrap();
        let exact = boundary_trace(&TraceQuery::new(&InitialProfile::ConstOne, 0.35, 1.0, &table))
            .unwrap()
            .value;
        assert!(((fd - exact) / exact).abs() < 1e-3);
    }

    #[test]
    fn refinement_shrinks_trace_gap() {
        let cfg = |nx| FdConfig {
            nx,
            nt: 4000,
            ..Default::default()
        };
        let trace =
            |nx| trace_fd(&solve_fd(&InitialProfile::ConstOne, 0.35, &cfg(nx)).unwrap(), 1.0).unwrap();
        let (t1, t2, t4) = (trace(100), trace(200), trace(400));
        let (d1, d2) = ((t1 - t2).abs(), (t2 - t4).abs());
        assert!(d1 >= 3.0 * d2, "gaps {d1:e} {d2:e}");
    }

    #[test]
    fn backward_euler_dissipates_and_respects_bounds() {
        let cfg = FdConfig {
            nx: 128,
            nt: 200,
            scheme: Scheme::BackwardEuler,
            ..Default::default()
        };
        for p in [
            InitialProfile::ConstOne,
            InitialProfile::XOneMinusX,
            InitialProfile::X,
        ] {
            let sol = solve_fd(&p, 0.3, &cfg).unwrap();
            let max0 = sol.values[0].iter().fold(0.0, |m: f64, v| m.max(*v));
            let norms: Vec<f64> = (0..sol.values.len()).map(|k| sol.l2_norm(k)).collect();
            assert!(norms.windows(2).all(|w| w[1] <= w[0]));
            for row in &sol.values {
                assert!(row.iter().all(|&v| v >= -1e-12 && v <= max0 + 1e-12));
            }
        }
    }

    #[test]
    fn full_problem_decouples_and_mirrors() {
        let cfg = FdConfig {
            nx: 64,
            nt: 100,
            ..Default::default()
        };
        let a = 0.5;
        let g = |z: f64| (1.0 - 4.0 * z * z).max(0.0) + z;
        let left_datum = move |x: f64| g(a - x);
        let right_datum = move |x: f64| g(x - a);
        let (left, right) = solve_full(&left_datum, &right_datum, a, &cfg).unwrap();
        let alone = solve_fd(&right_datum, a, &cfg).unwrap();
        assert_eq!(right, alone);
        for (l, r) in left.trace_series.iter().zip(&right.trace_series) {
            assert_eq!(*l, -*r);
        }
        for (lrow, rrow) in left.values.iter().zip(&right.values) {
            let mirrored: Vec<f64> = lrow.iter().rev().copied().collect();
            assert_eq!(&mirrored, rrow);
        }
        for sol in [&left, &right] {
            let at = |t: f64| {
                sol.snapshot_times
                    .iter()
                    .position(|&s| (s - t).abs() < 1e-12)
                    .unwrap()
            };
            assert!(sol.l2_norm(at(1.0)) < sol.l2_norm(at(0.5)));
        }
    }

    #[test]
    fn config_and_domain_errors() {
        let p = InitialProfile::ConstOne;
        let small = FdConfig {
            nx: 8,
            ..Default::default()
        };
        assert!(matches!(solve_fd(&p, 0.3, &small), Err(Error::Config(_))));
        assert!(solve_fd(&p, 0.9995, &FdConfig::default()).is_err());
        assert!(solve_full(
            &p,
            &p,
            0.0,
            &FdConfig {
                nx: 16,
                nt: 16,
                ..Default::default()
            }
        )
        .is_err());
        let sol = solve_fd(
            &p,
            0.3,
            &FdConfig {
                nx: 16,
                nt: 16,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(trace_fd(&sol, 1.5).is_err());
        assert!(trace_fd(&sol, -0.1).is_err());
    }
}
