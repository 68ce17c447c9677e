use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use degen_core::fd_oracle::Scheme;
use degen_core::inverse::NoiseDistribution;
use degen_core::InitialProfile;
use serde::Serialize;

/// Environment variable naming the default directory for `tables` output.
pub const OUT_DIR_ENV: &str = "DEGEN_OUT_DIR";

#[derive(Debug, Parser)]
#[command(
    name = "degen",
    version,
    about = "Spectral forward solver and degeneracy-point reconstruction for u_t = ((x-a) u_x)_x",
    arg_required_else_help = true
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct Common {
    /// Output format; `invert` defaults to json, everything else to csv.
    #[arg(long, value_enum, global = true)]
    pub format: Option<Format>,
    /// Write to this file instead of standard output; a `<file>.manifest.json`
    /// is written next to it. Without it the manifest goes to standard error.
    #[arg(long, global = true)]
    pub output: Option<PathBuf>,
    /// Number of Bessel zeros to tabulate.
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u32).range(1..=20000), global = true)]
    pub table_size: u32,
    /// Sequential execution (no thread pool).
    #[arg(long, global = true)]
    pub sequential: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Tabulate the first zeros of J0 with J0' at each zero.
    Zeros {
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u32).range(1..=20000))]
        count: u32,
    },
    /// Boundary flux mu(a, t) with truncation data.
    Trace(TraceArgs),
    /// mu and its a-derivative on a grid of degeneracy points.
    Scan(ScanArgs),
    /// Compare the series trace with the finite-volume solver.
    Fdcheck(FdcheckArgs),
    /// Recover a from (synthetic or recorded) flux observations.
    Invert(InvertArgs),
    /// Write every table and figure dataset into a directory.
    Tables(TablesArgs),
    /// Degeneracy points whose eigenvalues coincide.
    Alias(AliasArgs),
    /// Degeneracy points producing the same observation at t0.
    Collide(CollideArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TraceArgs {
    /// one | one-minus-x | x-one-minus-x | x | poly:c0,c1,... | samples:<path.csv>
    #[arg(long, value_parser = parse_profile)]
    #[serde(serialize_with = "display")]
    pub u0: InitialProfile,
    #[arg(long, value_parser = parse_a_closed)]
    pub a: f64,
    /// A single time, a comma list, or lo:hi:n.
    #[arg(long, value_parser = parse_points)]
    pub t: Points,
    #[arg(long, default_value_t = 1e-12, value_parser = parse_positive)]
    pub tail_tol: f64,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScanArgs {
    #[arg(long, value_parser = parse_profile)]
    #[serde(serialize_with = "display")]
    pub u0: InitialProfile,
    #[arg(long, value_parser = parse_positive)]
    pub t: f64,
    /// lo:hi:n with 0 <= lo < hi < 1.
    #[arg(long, value_parser = parse_grid, default_value = "0.01:0.99:99")]
    pub a_grid: Points,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FdcheckArgs {
    #[arg(long, value_parser = parse_profile)]
    #[serde(serialize_with = "display")]
    pub u0: InitialProfile,
    #[arg(long, value_parser = parse_a_closed)]
    pub a: f64,
    /// A single time, a comma list, or lo:hi:n.
    #[arg(long, value_parser = parse_points)]
    pub t: Points,
    #[arg(long, default_value_t = 800)]
    pub nx: usize,
    #[arg(long, default_value_t = 2000)]
    pub nt: usize,
    #[arg(long, value_enum, default_value_t = SchemeArg::Cn)]
    pub scheme: SchemeArg,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeArg {
    Be,
    Cn,
}

impl From<SchemeArg> for Scheme {
    fn from(s: SchemeArg) -> Self {
        match s {
            SchemeArg::Be => Scheme::BackwardEuler,
            SchemeArg::Cn => Scheme::CrankNicolson,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InvertArgs {
    #[arg(long, value_parser = parse_profile)]
    #[serde(serialize_with = "display")]
    pub u0: InitialProfile,
    /// Generate observations from this degeneracy point.
    #[arg(long, value_parser = parse_a_open, required_unless_present = "obs", conflicts_with = "obs")]
    pub a_true: Option<f64>,
    /// Observation CSV with header `t,beta`.
    #[arg(long)]
    pub obs: Option<PathBuf>,
    /// Observation times for synthetic data: a value, a comma list, or lo:hi:n.
    #[arg(long, value_parser = parse_points, required_unless_present = "obs")]
    pub t0: Option<Points>,
    /// Relative noise level, e.g. 0.01 for 1%.
    #[arg(long, default_value_t = 0.0, value_parser = parse_nonnegative)]
    pub noise: f64,
    #[arg(long, value_enum, default_value_t = DistributionArg::Uniform)]
    pub distribution: DistributionArg,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.5, value_parser = parse_a_open)]
    pub a_init: f64,
    #[arg(long, default_value_t = 0.01, value_parser = parse_positive)]
    pub delta: f64,
    /// Total number of starts, a_init included.
    #[arg(long, default_value_t = 9)]
    pub multistart: usize,
    #[arg(long, default_value_t = 1e-10, value_parser = parse_positive)]
    pub tol_a: f64,
    #[arg(long, default_value_t = 200)]
    pub max_iters: usize,
    /// Use the analytic cost derivative.
    #[arg(long)]
    pub use_derivative: bool,
    /// Also write the (possibly noisy) observations as `t,beta` CSV.
    #[arg(long)]
    pub save_obs: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DistributionArg {
    Uniform,
    Gaussian,
}

impl From<DistributionArg> for NoiseDistribution {
    fn from(d: DistributionArg) -> Self {
        match d {
            DistributionArg::Uniform => NoiseDistribution::UniformSymmetric,
            DistributionArg::Gaussian => NoiseDistribution::Gaussian,
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct TablesArgs {
    /// Target directory; defaults to $DEGEN_OUT_DIR, then `degen-out`.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Noise draws per level.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// Points of the a-grids used by the figure datasets.
    #[arg(long, default_value_t = 99, value_parser = clap::value_parser!(u32).range(8..=100000))]
    pub grid: u32,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AliasArgs {
    #[arg(long, value_parser = parse_a_open)]
    pub a1: f64,
    /// First mode; all admissible pairs up to --max-mode when omitted.
    #[arg(long, requires = "m2")]
    pub m1: Option<usize>,
    #[arg(long, requires = "m1")]
    pub m2: Option<usize>,
    #[arg(long, default_value_t = 20)]
    pub max_mode: usize,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct CollideArgs {
    #[arg(long, value_parser = parse_profile)]
    #[serde(serialize_with = "display")]
    pub u0: InitialProfile,
    #[arg(long, value_parser = parse_positive)]
    pub t0: f64,
    /// Observation level; a level hit twice is chosen when omitted.
    #[arg(long, value_parser = parse_finite)]
    pub beta: Option<f64>,
    #[arg(long, default_value_t = 0.01, value_parser = parse_positive)]
    pub delta: f64,
    #[arg(long, default_value_t = 512)]
    pub n_grid: usize,
}

/// Ordered evaluation points.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Points(pub Vec<f64>);

fn display<T: std::fmt::Display, S: serde::Serializer>(v: &T, s: S) -> Result<S::Ok, S::Error> {
    s.collect_str(v)
}

pub fn parse_finite(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(format!("`{s}` is not a finite number")),
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be positive"))
    }
}

fn parse_nonnegative(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be nonnegative"))
    }
}

fn parse_a_open(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is outside (0, 1)"))
    }
}

fn parse_a_closed(s: &str) -> Result<f64, String> {
    let v = parse_finite(s)?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

fn parse_range(s: &str) -> Result<Points, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [lo, hi, n] = parts[..] else {
        return Err(format!("`{s}` is not of the form lo:hi:n"));
    };
    let (lo, hi) = (parse_finite(lo)?, parse_finite(hi)?);
    let n: usize = n
        .trim()
        .parse()
        .map_err(|_| format!("`{n}` is not a point count"))?;
    if n < 2 || lo >= hi {
        return Err(format!("`{s}` needs lo < hi and n >= 2"));
    }
    Ok(Points(
        (0..n)
            .map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64)
            .collect(),
    ))
}

/// `v`, `v1,v2,...` or `lo:hi:n`; all positive.
pub fn parse_points(s: &str) -> Result<Points, String> {
    let pts = if s.contains(':') {
        parse_range(s)?
    } else {
        Points(s.split(',').map(parse_finite).collect::<Result<_, _>>()?)
    };
    if pts.0.iter().any(|&t| t <= 0.0) {
        return Err("times must be positive".into());
    }
    Ok(pts)
}

fn parse_grid(s: &str) -> Result<Points, String> {
    let pts = parse_range(s)?;
    if pts.0[0] < 0.0 || *pts.0.last().unwrap() >= 1.0 {
        return Err(format!("a-grid `{s}` must lie in [0, 1)"));
    }
    Ok(pts)
}

pub fn parse_profile(s: &str) -> Result<InitialProfile, String> {
    match s {
        "one" => Ok(InitialProfile::ConstOne),
        "one-minus-x" => Ok(InitialProfile::OneMinusX),
        "x-one-minus-x" => Ok(InitialProfile::XOneMinusX),
        "x" => Ok(InitialProfile::X),
        _ => {
            if let Some(list) = s.strip_prefix("poly:") {
                let c = list.split(',').map(parse_finite).collect::<Result<Vec<_>, _>>()?;
                InitialProfile::polynomial(c).map_err(|e| e.to_string())
            } else if let Some(path) = s.strip_prefix("samples:") {
                read_samples(path)
            } else {
                Err(format!(
                    "unknown profile `{s}`; expected one, one-minus-x, x-one-minus-x, x, poly:c0,c1,... or samples:<path.csv>"
                ))
            }
        }
    }
}

fn read_samples(path: &str) -> Result<InitialProfile, String> {
    let pairs = read_pairs(path.as_ref(), ["x", "value"])?;
    InitialProfile::sampled(pairs).map_err(|e| e.to_string())
}

/// Two-column numeric CSV with the given header.
pub fn read_pairs(path: &std::path::Path, header: [&str; 2]) -> Result<Vec<(f64, f64)>, String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let found = rdr
        .headers()
        .map_err(|e| format!("{}: {e}", path.display()))?
        .clone();
    if found.len() != 2 || found[0].trim() != header[0] || found[1].trim() != header[1] {
        return Err(format!(
            "{}: expected header `{},{}`",
            path.display(),
            header[0],
            header[1]
        ));
    }
    rdr.records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| format!("{}: {e}", path.display()))?;
            let field = |k: usize| {
                parse_finite(rec.get(k).unwrap_or(""))
                    .map_err(|e| format!("{} line {}: {e}", path.display(), i + 2))
            };
            Ok((field(0)?, field(1)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_grammar() {
        assert_eq!(parse_profile("one").unwrap(), InitialProfile::ConstOne);
        assert_eq!(
            parse_profile("poly:0,1").unwrap(),
            InitialProfile::polynomial(vec![0.0, 1.0]).unwrap()
        );
        assert!(parse_profile("poly:1,abc").is_err());
        assert!(parse_profile("cosine").is_err());
    }

    #[test]
    fn point_lists() {
        assert_eq!(parse_points("0.5").unwrap().0, vec![0.5]);
        assert_eq!(parse_points("0.1,0.2").unwrap().0, vec![0.1, 0.2]);
        assert_eq!(parse_points("1:2:3").unwrap().0, vec![1.0, 1.5, 2.0]);
        assert!(parse_points("0:1:3").is_err());
        assert!(parse_points("1:2").is_err());
        assert!(parse_grid("0.1:1.0:4").is_err());
        assert!(parse_a_open("1.5").is_err());
        assert!(parse_finite("nan").is_err());
    }
}
