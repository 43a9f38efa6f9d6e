//! The manifest.json record of a run.

use std::time::{SystemTime, UNIX_EPOCH};

use ldgmin::adapt::Mode;
use ldgmin::benchmarks::{self, Benchmark, Overrides};
use ldgmin::EnergyDensity;
use serde::{Deserialize, Serialize};

use crate::config::{RunArgs, RunSettings, UsageError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub benchmark: Benchmark,
    pub k: usize,
    pub r: f64,
    pub s: f64,
    /// Regularization parameter, present for the Bingham benchmark only.
    pub epsilon: Option<f64>,
    pub theta: f64,
    pub mode: Mode,
    pub levels: usize,
    pub ndof_budget: Option<usize>,
    pub max_iterations: usize,
    /// Density with all parameters after defaults and overrides.
    pub density: EnergyDensity,
    /// Material parameter of the optimal design benchmark.
    pub lambda: Option<f64>,
    pub load: f64,
    /// The history is byte-reproducible (no wall-clock column).
    pub deterministic: bool,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
}

impl RunManifest {
    pub fn new(settings: &RunSettings, timestamp: u64) -> Result<Self, UsageError> {
        let b = settings.benchmark;
        let o = settings.overrides;
        Ok(RunManifest {
            benchmark: b,
            k: o.k,
            r: o.r,
            s: o.s,
            epsilon: (b == Benchmark::Bingham).then_some(o.epsilon),
            theta: settings.theta,
            mode: settings.mode,
            levels: settings.levels,
            ndof_budget: settings.ndof_budget,
            max_iterations: settings.max_iterations,
            density: benchmarks::density(b, o.epsilon)?,
            lambda: (b == Benchmark::Odp).then_some(benchmarks::ODP_LAMBDA),
            load: 1.0,
            deterministic: !settings.timings,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        })
    }

    pub fn now(settings: &RunSettings) -> Result<Self, UsageError> {
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        Self::new(settings, ts)
    }

    /// Flags reproducing this run.
    pub fn to_args(&self) -> RunArgs {
        let adaptive = self.mode == Mode::Adaptive;
        RunArgs {
            benchmark: Some(self.benchmark.id().to_string()),
            k: Some(self.k),
            r: Some(self.r),
            s: Some(self.s),
            epsilon: self.epsilon,
            theta: adaptive.then_some(self.theta),
            mode: Some(if adaptive { "adaptive" } else { "uniform" }.to_string()),
            levels: Some(self.levels),
            ndof_budget: self.ndof_budget,
            max_iterations: Some(self.max_iterations),
            timings: !self.deterministic,
            ..RunArgs::default()
        }
    }

    pub fn overrides(&self) -> Overrides {
        Overrides { k: self.k, r: self.r, s: self.s, epsilon: self.epsilon.unwrap_or(Overrides::default().epsilon) }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, UsageError> {
        serde_json::from_str(text).map_err(|e| UsageError(format!("invalid manifest: {e}")))
    }
}
