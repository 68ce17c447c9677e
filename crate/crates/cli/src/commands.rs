use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use degen_core::bessel::zero_bracket;
use degen_core::fd_oracle::{solve_fd, trace_fd, FdConfig};
use degen_core::inverse::{
    alias_pair, collision_level, monotonicity_scan_with, observation_collision_with, InversionResult,
    NoiseSpec,
};
use degen_core::parallel::map_slice;
use degen_core::{
    add_noise, boundary_trace, build_table_with, eigenvalue, minimize, BesselTable, Execution,
    InitialProfile, InversionConfig, ObservationSet, TraceModel, TraceQuery, TruncationPolicy,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::cli::{
    read_pairs, AliasArgs, CollideArgs, Command, Common, FdcheckArgs, Format, InvertArgs, ScanArgs,
    TablesArgs, TraceArgs, OUT_DIR_ENV,
};
use crate::output::{emit, json_bytes, write_file, Cell, RunManifest, Table};

pub struct Ctx {
    pub common: Common,
    pub started: Instant,
}

impl Ctx {
    fn exec(&self) -> Execution {
        if self.common.sequential {
            Execution::Sequential
        } else {
            Execution::default()
        }
    }

    fn format(&self) -> Format {
        self.common.format.unwrap_or(Format::Csv)
    }

    fn table(&self) -> Result<BesselTable> {
        Ok(build_table_with(self.common.table_size as usize, self.exec())?)
    }

    fn policy(&self, tail_tol: f64) -> TruncationPolicy {
        TruncationPolicy {
            max_terms: (self.common.table_size as usize).min(2000),
            tail_tol,
            ..TruncationPolicy::default()
        }
    }

    fn manifest<P: Serialize>(&self, command: &str, params: &P, artifact: &str) -> Result<RunManifest> {
        let parameters = json!({ "common": &self.common, "command": serde_json::to_value(params)? });
        Ok(RunManifest::new(command, parameters, artifact))
    }

    fn finish(&self, bytes: &[u8], mut manifest: RunManifest) -> Result<()> {
        manifest.wall_time_s = self.started.elapsed().as_secs_f64();
        emit(self.common.output.as_deref(), bytes, manifest)
    }

    fn emit_table<P: Serialize>(
        &self,
        command: &str,
        params: &P,
        artifact: &str,
        table: &Table,
    ) -> Result<()> {
        let manifest = self.manifest(command, params, artifact)?;
        self.finish(&table.render(self.format())?, manifest)
    }
}

pub fn run(ctx: &Ctx, command: &Command) -> Result<()> {
    match command {
        Command::Zeros { count } => zeros(ctx, *count as usize),
        Command::Trace(args) => trace(ctx, args),
        Command::Scan(args) => scan(ctx, args),
        Command::Fdcheck(args) => fdcheck(ctx, args),
        Command::Invert(args) => invert(ctx, args),
        Command::Tables(args) => tables(ctx, args),
        Command::Alias(args) => alias(ctx, args),
        Command::Collide(args) => collide(ctx, args),
    }
}

fn zeros(ctx: &Ctx, count: usize) -> Result<()> {
    let table = build_table_with(count, ctx.exec())?;
    let mut out = Table::new(&["n", "j_n", "dj0", "bracket_lo", "bracket_hi"]);
    for n in 1..=count {
        let (lo, hi) = zero_bracket(n);
        out.push(vec![
            n.into(),
            table.zero(n).into(),
            table.deriv(n).into(),
            lo.into(),
            hi.into(),
        ]);
    }
    ctx.emit_table("zeros", &json!({ "count": count }), "Bessel zeros", &out)
}

fn trace(ctx: &Ctx, args: &TraceArgs) -> Result<()> {
    let table = ctx.table()?;
    let policy = ctx.policy(args.tail_tol);
    let mut out = Table::new(&["a", "t", "mu", "terms", "tail_bound"]);
    for &t in &args.t.0 {
        let v = boundary_trace(&TraceQuery::new(&args.u0, args.a, t, &table).with_policy(policy))?;
        out.push(vec![
            args.a.into(),
            t.into(),
            v.value.into(),
            v.terms_used.into(),
            v.tail_bound.into(),
        ]);
    }
    ctx.emit_table("trace", args, "boundary trace", &out)
}

fn scan(ctx: &Ctx, args: &ScanArgs) -> Result<()> {
    let table = ctx.table()?;
    let model = TraceModel::new(&args.u0, &table);
    let grid = &args.a_grid.0;
    if grid.len() < 8 {
        bail!("scan needs at least 8 grid points");
    }
    let report = monotonicity_scan_with(
        &model,
        args.t,
        grid[0],
        grid[grid.len() - 1],
        grid.len(),
        ctx.exec(),
    )?;
    let mut out = Table::new(&["a", "mu", "dmu_da"]);
    for k in 0..report.grid.len() {
        out.push(vec![
            report.grid[k].into(),
            report.mu[k].into(),
            report.dmu_da[k].into(),
        ]);
    }
    ctx.emit_table("scan", args, "monotonicity scan", &out)
}

fn fdcheck(ctx: &Ctx, args: &FdcheckArgs) -> Result<()> {
    let table = ctx.table()?;
    let t_end = args.t.0.iter().copied().fold(0.0, f64::max);
    let cfg = FdConfig {
        nx: args.nx,
        nt: args.nt,
        scheme: args.scheme.into(),
        t_end,
        snapshot_stride: args.nt,
    };
    let sol = solve_fd(&args.u0, args.a, &cfg)?;
    let policy = ctx.policy(1e-12);
    let mut out = Table::new(&["t", "mu_series", "mu_fd", "rel_gap"]);
    for &t in &args.t.0 {
        let series = boundary_trace(&TraceQuery::new(&args.u0, args.a, t, &table).with_policy(policy))?.value;
        let fd = trace_fd(&sol, t)?;
        out.push(vec![
            t.into(),
            series.into(),
            fd.into(),
            ((fd - series) / series).abs().into(),
        ]);
    }
    ctx.emit_table("fdcheck", args, "oracle comparison", &out)
}

#[derive(Serialize)]
struct InvertRecord<'a> {
    a_hat: f64,
    cost: f64,
    iterations: usize,
    converged: bool,
    history: &'a [degen_core::inverse::Iterate],
    all_minima: &'a [degen_core::inverse::Iterate],
    starts: &'a [degen_core::inverse::StartOutcome],
    config: &'a InversionConfig,
    seed: u64,
    noise: NoiseSpec,
    observations: &'a ObservationSet,
}

fn observations(args: &InvertArgs, model: &TraceModel<'_>) -> Result<ObservationSet> {
    let clean = match (&args.obs, args.a_true) {
        (Some(path), _) => {
            let pairs = read_pairs(path, ["t", "beta"]).map_err(anyhow::Error::msg)?;
            let (times, values) = pairs.into_iter().unzip();
            ObservationSet::new(times, values, format!("file {}", path.display()))?
        }
        (None, Some(a_true)) => {
            let times = &args.t0.as_ref().context("--t0 is required with --a-true")?.0;
            ObservationSet::synthetic(model, a_true, times)?
        }
        (None, None) => bail!("either --a-true or --obs is required"),
    };
    let spec = NoiseSpec {
        level: args.noise,
        distribution: args.distribution.into(),
        seed: args.seed,
    };
    Ok(add_noise(&clean, spec)?)
}

fn invert(ctx: &Ctx, args: &InvertArgs) -> Result<()> {
    let table = ctx.table()?;
    let model = TraceModel::new(&args.u0, &table);
    let obs = observations(args, &model)?;
    if let Some(path) = &args.save_obs {
        let mut t = Table::new(&["t", "beta"]);
        for (&time, &beta) in obs.times.iter().zip(&obs.values) {
            t.push(vec![time.into(), beta.into()]);
        }
        write_file(path, &t.to_csv()?)?;
    }
    let cfg = InversionConfig {
        delta: args.delta,
        a_init: args.a_init,
        multistart: args.multistart,
        tol_a: args.tol_a,
        max_iters: args.max_iters,
        use_derivative: args.use_derivative,
        execution: ctx.exec(),
    };
    let r = minimize(&model, &obs, &cfg)?;
    let bytes = match ctx.common.format.unwrap_or(Format::Json) {
        Format::Json => json_bytes(&invert_record(&r, &cfg, &obs))?,
        Format::Csv => {
            let mut t = Table::new(&["iteration", "a", "cost"]);
            for (k, it) in r.history.iter().enumerate() {
                t.push(vec![k.into(), it.a.into(), it.cost.into()]);
            }
            t.to_csv()?
        }
    };
    let mut manifest = ctx.manifest("invert", args, "inversion")?;
    manifest.seeds.push(args.seed);
    if let Some(path) = &args.save_obs {
        manifest.outputs.push(path.clone());
    }
    ctx.finish(&bytes, manifest)?;
    if !r.converged {
        bail!(
            "minimisation did not converge within {} evaluations",
            cfg.max_iters
        );
    }
    Ok(())
}

fn invert_record<'a>(
    r: &'a InversionResult,
    cfg: &'a InversionConfig,
    obs: &'a ObservationSet,
) -> InvertRecord<'a> {
    InvertRecord {
        a_hat: r.a_hat,
        cost: r.cost,
        iterations: r.iterations,
        converged: r.converged,
        history: &r.history,
        all_minima: &r.all_minima,
        starts: &r.starts,
        config: cfg,
        seed: obs.noise.seed,
        noise: obs.noise,
        observations: obs,
    }
}

fn alias(ctx: &Ctx, args: &AliasArgs) -> Result<()> {
    let max_mode = args.m1.max(args.m2).unwrap_or(args.max_mode);
    let table = build_table_with(max_mode.max(1), ctx.exec())?;
    let pairs: Vec<(usize, usize)> = match (args.m1, args.m2) {
        (Some(m1), Some(m2)) => vec![(m1, m2)],
        _ => (1..=max_mode)
            .flat_map(|m1| (1..=max_mode).map(move |m2| (m1, m2)))
            .collect(),
    };
    let mut out = Table::new(&["a1", "m1", "m2", "a2", "lambda1", "lambda2"]);
    for (m1, m2) in pairs {
        if let Some(a2) = alias_pair(&table, args.a1, m1, m2)? {
            out.push(vec![
                args.a1.into(),
                m1.into(),
                m2.into(),
                a2.into(),
                eigenvalue(&table, m1, args.a1)?.into(),
                eigenvalue(&table, m2, a2)?.into(),
            ]);
        }
    }
    ctx.emit_table("alias", args, "eigenvalue aliasing", &out)
}

fn collide(ctx: &Ctx, args: &CollideArgs) -> Result<()> {
    let table = ctx.table()?;
    let model = TraceModel::new(&args.u0, &table);
    let beta = match args.beta {
        Some(b) => Some(b),
        None => collision_level(&model, args.t0, args.delta, args.n_grid)?,
    };
    let mut out = Table::new(&["t0", "beta", "root"]);
    match beta {
        Some(beta) => {
            for root in
                observation_collision_with(&model, args.t0, beta, args.delta, args.n_grid, ctx.exec())?
            {
                out.push(vec![args.t0.into(), beta.into(), root.into()]);
            }
        }
        None => eprintln!(
            "mu(., {}) is monotone on the admissible interval; no level is hit twice",
            args.t0
        ),
    }
    ctx.emit_table("collide", args, "observation collision", &out)
}

const NOISE_LEVELS: [f64; 5] = [1e-2, 1e-3, 1e-4, 1e-5, 0.0];

fn out_dir(args: &TablesArgs) -> PathBuf {
    args.out_dir
        .clone()
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("degen-out"))
}

struct Writer<'a> {
    dir: &'a Path,
    format: Format,
    written: Vec<PathBuf>,
}

impl Writer<'_> {
    fn put(&mut self, stem: &str, table: &Table) -> Result<()> {
        let ext = match self.format {
            Format::Csv => "csv",
            Format::Json => "json",
        };
        let path = self.dir.join(format!("{stem}.{ext}"));
        write_file(&path, &table.render(self.format)?)?;
        self.written.push(path);
        Ok(())
    }
}

fn single_start(a_init: f64) -> InversionConfig {
    InversionConfig {
        a_init,
        multistart: 1,
        execution: Execution::Sequential,
        ..InversionConfig::default()
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn tables(ctx: &Ctx, args: &TablesArgs) -> Result<()> {
    let dir = out_dir(args);
    let table = ctx.table()?;
    let exec = ctx.exec();
    let mut w = Writer {
        dir: &dir,
        format: ctx.format(),
        written: Vec::new(),
    };
    let (a_true, t0) = (0.35, 0.05);

    // Noiseless recovery from two starts.
    let one = InitialProfile::ConstOne;
    let model = TraceModel::new(&one, &table);
    let obs = ObservationSet::synthetic(&model, a_true, &[t0])?;
    let mut t1 = Table::new(&["a_init", "a_hat", "abs_error", "cost", "iterations", "converged"]);
    let mut t1h = Table::new(&["a_init", "iteration", "a", "cost"]);
    for a_init in [0.1, 0.6] {
        let r = minimize(&model, &obs, &single_start(a_init))?;
        t1.push(vec![
            a_init.into(),
            r.a_hat.into(),
            (r.a_hat - a_true).abs().into(),
            r.cost.into(),
            r.iterations.into(),
            r.converged.into(),
        ]);
        for (k, it) in r.history.iter().enumerate() {
            t1h.push(vec![a_init.into(), k.into(), it.a.into(), it.cost.into()]);
        }
    }
    w.put("table1", &t1)?;
    w.put("table1_history", &t1h)?;

    // Noise sweeps from a_init = 0.1.
    for (stem, profile) in [
        ("table2", InitialProfile::ConstOne),
        ("table3", InitialProfile::OneMinusX),
    ] {
        let model = TraceModel::new(&profile, &table);
        let clean = ObservationSet::synthetic(&model, a_true, &[t0])?;
        let cells: Vec<(f64, u64)> = NOISE_LEVELS
            .iter()
            .flat_map(|&level| (0..args.seeds).map(move |seed| (level, seed)))
            .collect();
        let results = map_slice(
            exec,
            &cells,
            |&(level, seed)| -> degen_core::Result<InversionResult> {
                let obs = add_noise(&clean, NoiseSpec::uniform(level, seed))?;
                minimize(&model, &obs, &single_start(0.1))
            },
        )
        .into_iter()
        .collect::<degen_core::Result<Vec<_>>>()?;
        let mut t = Table::new(&[
            "level",
            "seed",
            "a_hat",
            "abs_error",
            "cost",
            "iterations",
            "converged",
        ]);
        let mut summary = Table::new(&["level", "median_abs_error"]);
        for (&level, chunk) in NOISE_LEVELS
            .iter()
            .zip(results.chunks(args.seeds.max(1) as usize))
        {
            for (seed, r) in chunk.iter().enumerate() {
                t.push(vec![
                    level.into(),
                    seed.into(),
                    r.a_hat.into(),
                    (r.a_hat - a_true).abs().into(),
                    r.cost.into(),
                    r.iterations.into(),
                    r.converged.into(),
                ]);
            }
            if !chunk.is_empty() {
                let errs = chunk.iter().map(|r| (r.a_hat - a_true).abs()).collect();
                summary.push(vec![level.into(), median(errs).into()]);
            }
        }
        w.put(stem, &t)?;
        w.put(&format!("{stem}_summary"), &summary)?;
    }

    // Trace and its a-derivative against a.
    let figures = [
        ("figure3", InitialProfile::ConstOne, vec![1.0]),
        ("figure4", InitialProfile::OneMinusX, vec![1.0]),
        ("figure5", InitialProfile::XOneMinusX, vec![1.0, 2.2]),
        ("figure6", InitialProfile::X, vec![1.0, 2.2]),
    ];
    for (stem, profile, times) in figures {
        let model = TraceModel::new(&profile, &table);
        let mut t = Table::new(&["t", "a", "mu", "dmu_da"]);
        for time in times {
            let r = monotonicity_scan_with(&model, time, 0.01, 0.99, args.grid as usize, exec)?;
            for k in 0..r.grid.len() {
                t.push(vec![
                    time.into(),
                    r.grid[k].into(),
                    r.mu[k].into(),
                    r.dmu_da[k].into(),
                ]);
            }
        }
        w.put(stem, &t)?;
    }

    // u0 = x: observations against a, their collisions, and two recoveries.
    let x = InitialProfile::X;
    let model = TraceModel::new(&x, &table);
    let mut f7 = Table::new(&["t0", "a", "mu"]);
    let mut f7c = Table::new(&["t0", "beta", "root"]);
    for time in [0.05, 0.2] {
        let r = monotonicity_scan_with(&model, time, 0.01, 0.99, args.grid as usize, exec)?;
        for k in 0..r.grid.len() {
            f7.push(vec![time.into(), r.grid[k].into(), r.mu[k].into()]);
        }
        if let Some(beta) = collision_level(&model, time, 0.01, 512)? {
            for root in observation_collision_with(&model, time, beta, 0.01, 512, exec)? {
                f7c.push(vec![time.into(), beta.into(), root.into()]);
            }
        }
    }
    w.put("figure7", &f7)?;
    w.put("figure7_collisions", &f7c)?;
    let mut t3 = Table::new(&[
        "a_true",
        "a_init",
        "t0",
        "a_hat",
        "cost",
        "iterations",
        "all_minima",
    ]);
    for (a_d, a_init) in [(0.163, 0.1), (0.379, 0.4)] {
        let obs = ObservationSet::synthetic(&model, a_d, &[t0])?;
        let r = minimize(&model, &obs, &single_start(a_init))?;
        let global = minimize(
            &model,
            &obs,
            &InversionConfig {
                a_init,
                execution: exec,
                ..InversionConfig::default()
            },
        )?;
        let minima: Vec<String> = global
            .all_minima
            .iter()
            .map(|m| format!("{:.16e}", m.a))
            .collect();
        t3.push(vec![
            a_d.into(),
            a_init.into(),
            t0.into(),
            r.a_hat.into(),
            r.cost.into(),
            r.iterations.into(),
            Cell::Text(minima.join(";")),
        ]);
    }
    w.put("test3", &t3)?;

    let mut manifest = ctx.manifest("tables", args, "Tables 1-3, Figures 3-7, Test 3")?;
    manifest.seeds = (0..args.seeds).collect();
    manifest.outputs = w.written.clone();
    manifest.wall_time_s = ctx.started.elapsed().as_secs_f64();
    let manifest_path = dir.join("manifest.json");
    write_file(&manifest_path, &json_bytes(&manifest)?)?;
    let listing: Value = json!({ "out_dir": dir, "files": w.written, "manifest": manifest_path });
    println!("{}", serde_json::to_string_pretty(&listing)?);
    Ok(())
}
