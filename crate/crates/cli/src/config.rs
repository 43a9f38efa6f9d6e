//! Command-line flags, key=value config files and their merge.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use ldgmin::adapt::Mode;
use ldgmin::benchmarks::{Benchmark, Overrides};
use ldgmin::SolverSettings;

#[derive(Debug, Clone, PartialEq)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

impl From<ldgmin::Error> for UsageError {
    fn from(e: ldgmin::Error) -> Self {
        UsageError(e.to_string())
    }
}

/// Flags of the `run` subcommand. Every value is optional so that a config
/// file can supply it; flags take precedence over the file.
#[derive(Args, Debug, Clone, Default)]
pub struct RunArgs {
    /// Benchmark id: odp, plaplace4 or bingham.
    #[arg(long)]
    pub benchmark: Option<String>,
    /// Polynomial degree.
    #[arg(long)]
    pub k: Option<usize>,
    /// Stabilization exponent.
    #[arg(long)]
    pub r: Option<f64>,
    /// Stabilization scaling exponent.
    #[arg(long)]
    pub s: Option<f64>,
    /// Bingham regularization parameter.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Bulk marking fraction (adaptive mode).
    #[arg(long)]
    pub theta: Option<f64>,
    /// uniform or adaptive.
    #[arg(long)]
    pub mode: Option<String>,
    /// Number of refinement levels; 0 solves on the initial mesh only.
    #[arg(long)]
    pub levels: Option<usize>,
    /// Stop once a level reaches this many unknowns.
    #[arg(long = "ndof-budget")]
    pub ndof_budget: Option<usize>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Flat key=value file with defaults for any of these flags.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the mesh of every level with per-cell |grad v_C|.
    #[arg(long = "dump-mesh")]
    pub dump_mesh: bool,
    /// Write convergence.svg.
    #[arg(long)]
    pub plot: bool,
    /// Write wall-clock seconds into history.csv (breaks byte-identical output).
    #[arg(long)]
    pub timings: bool,
    /// Newton iteration limit per level.
    #[arg(long = "max-iterations")]
    pub max_iterations: Option<usize>,
}

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub benchmark: Benchmark,
    pub overrides: Overrides,
    pub theta: f64,
    pub mode: Mode,
    pub levels: usize,
    pub ndof_budget: Option<usize>,
    pub out: PathBuf,
    pub dump_mesh: bool,
    pub plot: bool,
    pub timings: bool,
    pub max_iterations: usize,
}

pub const DEFAULT_LEVELS: usize = 10;
pub const DEFAULT_THETA: f64 = 0.5;

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, UsageError> {
    value.trim().parse().map_err(|_| UsageError(format!("invalid value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, UsageError> {
    match value.trim() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(UsageError(format!("invalid boolean '{value}' for {key}"))),
    }
}

/// Reads a flat `key = value` file. Blank lines and `#` comments are ignored;
/// keys use the flag spelling with either `-` or `_`.
pub fn parse_config(text: &str) -> Result<RunArgs, UsageError> {
    let mut args = RunArgs::default();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| UsageError(format!("config line {}: expected key=value", n + 1)))?;
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match key.as_str() {
            "benchmark" => args.benchmark = Some(value.to_string()),
            "k" => args.k = Some(parse(&key, value)?),
            "r" => args.r = Some(parse(&key, value)?),
            "s" => args.s = Some(parse(&key, value)?),
            "epsilon" => args.epsilon = Some(parse(&key, value)?),
            "theta" => args.theta = Some(parse(&key, value)?),
            "mode" => args.mode = Some(value.to_string()),
            "levels" => args.levels = Some(parse(&key, value)?),
            "ndof-budget" => args.ndof_budget = Some(parse(&key, value)?),
            "out" => args.out = Some(PathBuf::from(value)),
            "dump-mesh" => args.dump_mesh = parse_bool(&key, value)?,
            "plot" => args.plot = parse_bool(&key, value)?,
            "timings" => args.timings = parse_bool(&key, value)?,
            "max-iterations" => args.max_iterations = Some(parse(&key, value)?),
            _ => return Err(UsageError(format!("config line {}: unknown key '{key}'", n + 1))),
        }
    }
    Ok(args)
}

impl RunArgs {
    /// `self` over `base`: values present here win.
    pub fn over(self, base: RunArgs) -> RunArgs {
        RunArgs {
            benchmark: self.benchmark.or(base.benchmark),
            k: self.k.or(base.k),
            r: self.r.or(base.r),
            s: self.s.or(base.s),
            epsilon: self.epsilon.or(base.epsilon),
            theta: self.theta.or(base.theta),
            mode: self.mode.or(base.mode),
            levels: self.levels.or(base.levels),
            ndof_budget: self.ndof_budget.or(base.ndof_budget),
            out: self.out.or(base.out),
            config: self.config,
            dump_mesh: self.dump_mesh || base.dump_mesh,
            plot: self.plot || base.plot,
            timings: self.timings || base.timings,
            max_iterations: self.max_iterations.or(base.max_iterations),
        }
    }

    /// Merges the config file, if any, and validates the combination.
    pub fn resolve(self) -> Result<RunSettings, UsageError> {
        let merged = match &self.config {
            Some(path) => {
                let text = read(path)?;
                self.over(parse_config(&text)?)
            }
            None => self,
        };
        merged.settings()
    }

    fn settings(self) -> Result<RunSettings, UsageError> {
        let benchmark: Benchmark = self
            .benchmark
            .as_deref()
            .ok_or_else(|| UsageError("missing --benchmark (odp, plaplace4 or bingham)".into()))?
            .parse()?;
        let mode: Mode = self.mode.as_deref().unwrap_or("adaptive").parse()?;
        if mode == Mode::Uniform && self.theta.is_some() {
            return Err(UsageError("--theta only applies to --mode adaptive".into()));
        }
        if benchmark != Benchmark::Bingham && self.epsilon.is_some() {
            return Err(UsageError(format!("--epsilon only applies to the bingham benchmark, not {benchmark}")));
        }
        let d = Overrides::default();
        let overrides = Overrides {
            k: self.k.unwrap_or(d.k),
            r: self.r.unwrap_or(d.r),
            s: self.s.unwrap_or(d.s),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
        };
        ldgmin::benchmarks::defaults(benchmark, &overrides)?;
        let theta = self.theta.unwrap_or(DEFAULT_THETA);
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(UsageError(format!("--theta must lie in (0, 1], got {theta}")));
        }
        let max_iterations = self.max_iterations.unwrap_or(SolverSettings::default().max_iterations);
        if max_iterations == 0 {
            return Err(UsageError("--max-iterations must be at least 1".into()));
        }
        Ok(RunSettings {
            benchmark,
            overrides,
            theta,
            mode,
            levels: self.levels.unwrap_or(DEFAULT_LEVELS),
            ndof_budget: self.ndof_budget,
            out: self.out.unwrap_or_else(|| PathBuf::from(format!("out-{benchmark}"))),
            dump_mesh: self.dump_mesh,
            plot: self.plot,
            timings: self.timings,
            max_iterations,
        })
    }
}

fn read(path: &Path) -> Result<String, UsageError> {
    fs::read_to_string(path).map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))
}
