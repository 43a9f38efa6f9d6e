//! Default problem data of the three L-shape benchmarks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::densities::{EnergyDensity, OptimalDesign};
use crate::error::{Error, Result};
use crate::ldg::ProblemConfig;
use crate::mesh::BoundarySpec;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Benchmark {
    Odp,
    Plaplace4,
    Bingham,
}

impl Benchmark {
    pub const ALL: [Benchmark; 3] = [Benchmark::Odp, Benchmark::Plaplace4, Benchmark::Bingham];

    pub fn id(self) -> &'static str {
        match self {
            Benchmark::Odp => "odp",
            Benchmark::Plaplace4 => "plaplace4",
            Benchmark::Bingham => "bingham",
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Benchmark {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Benchmark::ALL
            .into_iter()
            .find(|b| b.id() == s)
            .ok_or_else(|| Error::Config(format!("unknown benchmark '{s}' (expected odp, plaplace4 or bingham)")))
    }
}

pub const ODP_MU1: f64 = 1.0;
pub const ODP_MU2: f64 = 2.0;
pub const ODP_LAMBDA: f64 = 0.0145;
pub const BINGHAM_MU: f64 = 1.0;
pub const BINGHAM_G: f64 = 0.2;
pub const BINGHAM_EPSILON: f64 = 1e-5;

/// Overridable discretization parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Overrides {
    pub k: usize,
    pub r: f64,
    pub s: f64,
    pub epsilon: f64,
}

impl Default for Overrides {
    fn default() -> Self {
        Overrides { k: 1, r: 2.0, s: 1.0, epsilon: BINGHAM_EPSILON }
    }
}

pub fn optimal_design() -> OptimalDesign {
    OptimalDesign::from_lambda(ODP_MU1, ODP_MU2, ODP_LAMBDA).expect("default optimal design parameters are valid")
}

pub fn boundary(benchmark: Benchmark) -> BoundarySpec {
    match benchmark {
        Benchmark::Plaplace4 => BoundarySpec::reentrant_corner_dirichlet(),
        Benchmark::Odp | Benchmark::Bingham => BoundarySpec::AllDirichlet,
    }
}

pub fn density(benchmark: Benchmark, epsilon: f64) -> Result<EnergyDensity> {
    match benchmark {
        Benchmark::Odp => Ok(EnergyDensity::OptimalDesign(optimal_design())),
        Benchmark::Plaplace4 => EnergyDensity::p_laplace(4.0),
        Benchmark::Bingham => EnergyDensity::bingham_regularized(BINGHAM_MU, BINGHAM_G, epsilon),
    }
}

/// Problem configuration with `f = 1` on the L-shape.
pub fn defaults(benchmark: Benchmark, overrides: &Overrides) -> Result<ProblemConfig> {
    ProblemConfig::new(
        density(benchmark, overrides.epsilon)?,
        overrides.k,
        overrides.r,
        overrides.s,
        ProblemConfig::constant_load(1.0),
        boundary(benchmark),
    )
}
