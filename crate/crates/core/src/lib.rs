//! Local discontinuous Galerkin minimization of convex energies on
//! triangulations of polygonal domains in two dimensions.

pub mod adapt;
pub mod benchmarks;
pub mod densities;
pub mod duality;
pub mod error;
pub mod femspace;
pub mod ldg;
pub mod mesh;
pub mod postprocess;
pub mod solver;

pub use adapt::{doerfler_mark, run_loop, AdaptConfig, ConvergenceRecord, Mode};
pub use benchmarks::Benchmark;
pub use densities::EnergyDensity;
pub use duality::{div_reconstruct, dual_energy, dual_variable, interp_dual, DualField};
pub use error::{Error, Result};
pub use femspace::{DgFunction, DgSpace};
pub use ldg::{Discretization, ProblemConfig};
pub use mesh::{BoundarySpec, FaceLabel, Mesh};
pub use postprocess::{estimator, nodal_average, rt_fit};
pub use solver::{minimize, SolveReport, SolverSettings};
