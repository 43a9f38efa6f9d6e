//! Newton minimization of the discrete energy with shifted sparse Cholesky
//! factorization and Armijo backtracking.

use std::time::Instant;

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{Mat, Par, Side};
use serde::{Deserialize, Serialize};

use crate::densities::{Bingham, EnergyDensity};
use crate::error::{Error, Result};
use crate::femspace::DgFunction;
use crate::ldg::Discretization;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Bound on the max-norm of the coefficient gradient.
    pub gradient_tolerance: f64,
    /// Relative bound on the max-norm of an accepted step.
    pub step_tolerance: f64,
    /// Relative bound on the Newton decrement below which steps are taken
    /// without line search until the gradient stops decreasing.
    pub function_tolerance: f64,
    /// Smallest nonzero diagonal shift tried when factorization fails.
    pub hessian_shift: f64,
    pub armijo: f64,
    pub max_halvings: usize,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            max_iterations: 1000,
            gradient_tolerance: 1e-15,
            step_tolerance: 1e-15,
            function_tolerance: 1e-15,
            hessian_shift: 1e-10,
            armijo: 1e-4,
            max_halvings: 60,
        }
    }
}

impl SolverSettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.gradient_tolerance, self.step_tolerance, self.function_tolerance, self.hessian_shift];
        if positive.iter().any(|t| !(*t > 0.0)) || !(self.armijo > 0.0 && self.armijo < 1.0) {
            return Err(Error::Config("solver tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum StopReason {
    Gradient,
    Step,
    /// Newton decrement at rounding level and no further gradient decrease.
    Stagnation,
    LineSearch,
    MaxIterations,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: usize,
    pub gradient_norm: f64,
    pub energy: f64,
    pub converged: bool,
    pub reason: StopReason,
    pub seconds: f64,
    /// Largest diagonal shift needed for a factorization.
    pub max_shift: f64,
}

fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(u: &[f64], t: f64, d: &[f64]) -> Vec<f64> {
    u.iter().zip(d).map(|(a, b)| a + t * b).collect()
}

struct NewtonStep {
    direction: Vec<f64>,
    shift: f64,
}

fn newton_direction(
    disc: &Discretization,
    symbolic: &SymbolicLlt<usize>,
    mut values: Vec<f64>,
    gradient: &[f64],
    settings: &SolverSettings,
) -> Result<NewtonStep> {
    let pattern = disc.hessian_pattern();
    let diagonal = pattern.diagonal_positions();
    let base = values.clone();
    let mut shift = 0.0;
    let mut rhs = Mat::<f64>::zeros(gradient.len(), 1);
    for (i, g) in gradient.iter().enumerate() {
        rhs[(i, 0)] = -g;
    }
    for _ in 0..200 {
        if shift > 0.0 {
            values.copy_from_slice(&base);
            for &p in &diagonal {
                values[p] += shift;
            }
        }
        if let Ok(llt) = Llt::try_new_with_symbolic(symbolic.clone(), pattern.matrix(&values), Side::Lower) {
            let x = llt.solve(&rhs);
            let direction: Vec<f64> = (0..gradient.len()).map(|i| x[(i, 0)]).collect();
            if direction.iter().all(|v| v.is_finite()) && dot(&direction, gradient) < 0.0 {
                return Ok(NewtonStep { direction, shift });
            }
        }
        shift = if shift == 0.0 { settings.hessian_shift } else { 2.0 * shift };
    }
    Err(Error::Factorization(format!("no descent direction after shifting the Hessian to {shift:e}")))
}

/// Auxiliary flux direction `w ~ a/|a|_eps` per volume quadrature point for
/// regularized Bingham densities. The Hessian of `g |a|_eps` is replaced by
/// `g/rho (I - sym(w a^T)/rho)`, which is positive definite for `|w| <= 1`
/// and coincides with the exact Hessian when `w = a/rho`.
struct DualCurvature {
    density: Bingham,
    offsets: Vec<usize>,
    w: Vec<[f64; 2]>,
}

impl DualCurvature {
    fn new(disc: &Discretization, u: &[f64]) -> Option<Self> {
        let EnergyDensity::Bingham(density) = disc.config.density else {
            return None;
        };
        if !density.is_regularized() {
            return None;
        }
        let mut offsets = Vec::with_capacity(disc.mesh().num_cells() + 1);
        offsets.push(0);
        for cell in 0..disc.mesh().num_cells() {
            offsets.push(offsets[cell] + disc.cell_quadrature_len(cell));
        }
        let gu = disc.gradient.apply(u);
        let mut w = Vec::with_capacity(offsets[offsets.len() - 1]);
        for cell in 0..disc.mesh().num_cells() {
            for q in 0..disc.cell_quadrature_len(cell) {
                let a = disc.gradient_at(&gu, cell, q);
                let rho = a[0].hypot(a[1]).hypot(density.epsilon);
                w.push([a[0] / rho, a[1] / rho]);
            }
        }
        Some(DualCurvature { density, offsets, w })
    }

    fn hessian_values(&self, disc: &Discretization, u: &[f64]) -> Result<Vec<f64>> {
        let Bingham { mu, g, epsilon } = self.density;
        disc.hessian_values_with(u, |cell, q, a| {
            let w = self.w[self.offsets[cell] + q];
            let rho = a[0].hypot(a[1]).hypot(epsilon);
            let c = g / rho;
            let m = |i: usize, j: usize| 0.5 * (w[i] * a[j] + w[j] * a[i]) / rho;
            Ok([[mu + c * (1.0 - m(0, 0)), -c * m(0, 1)], [-c * m(1, 0), mu + c * (1.0 - m(1, 1))]])
        })
    }

    /// Linearized update of `w` for the full Newton step `du` taken from `u`,
    /// projected back onto the unit ball.
    fn update(&mut self, disc: &Discretization, u: &[f64], du: &[f64]) {
        let epsilon = self.density.epsilon;
        let gu = disc.gradient.apply(u);
        let gdu = disc.gradient.apply(du);
        for cell in 0..disc.mesh().num_cells() {
            for q in 0..disc.cell_quadrature_len(cell) {
                let a = disc.gradient_at(&gu, cell, q);
                let da = disc.gradient_at(&gdu, cell, q);
                let rho = a[0].hypot(a[1]).hypot(epsilon);
                let w = &mut self.w[self.offsets[cell] + q];
                let adot = (a[0] * da[0] + a[1] * da[1]) / rho;
                let mut next = [0.0; 2];
                for i in 0..2 {
                    next[i] = (da[i] - w[i] * adot) / rho + a[i] / rho;
                }
                let norm = next[0].hypot(next[1]);
                if norm > 1.0 {
                    next = [next[0] / norm, next[1] / norm];
                }
                *w = next;
            }
        }
    }
}

/// Minimizes `E_h` starting from `init`.
pub fn minimize(disc: &Discretization, init: &DgFunction, settings: &SolverSettings) -> Result<(DgFunction, SolveReport)> {
    settings.validate()?;
    disc.space.check(init)?;
    faer::set_global_parallelism(Par::Seq);
    let start = Instant::now();
    let symbolic = SymbolicLlt::try_new(disc.hessian_pattern().symbolic().as_ref(), Side::Lower)
        .map_err(|e| Error::Factorization(format!("{e:?}")))?;

    let mut u = init.coefficients.clone();
    let mut energy = disc.energy(&u)?;
    if energy.is_nan() {
        return Err(Error::NanEnergy { iteration: 0 });
    }
    let mut gradient = disc.energy_gradient(&u)?;
    let mut gnorm = max_norm(&gradient);
    let mut curvature = DualCurvature::new(disc, &u);
    let mut max_shift: f64 = 0.0;
    let mut iterations = 0;
    let reason = loop {
        if gnorm <= settings.gradient_tolerance {
            break StopReason::Gradient;
        }
        if iterations >= settings.max_iterations {
            break StopReason::MaxIterations;
        }
        iterations += 1;
        let values = match &curvature {
            Some(c) => c.hessian_values(disc, &u)?,
            None => disc.hessian_values(&u)?,
        };
        let step = newton_direction(disc, &symbolic, values, &gradient, settings)?;
        max_shift = max_shift.max(step.shift);
        let slope = dot(&gradient, &step.direction);
        let decrement = -slope;
        let scale = 1.0 + energy.abs();

        if decrement <= settings.function_tolerance.max(1e-13) * scale {
            // Rounding regime: full steps while the gradient keeps shrinking.
            let trial = axpy(&u, 1.0, &step.direction);
            let trial_energy = disc.energy(&trial)?;
            if trial_energy.is_nan() {
                return Err(Error::NanEnergy { iteration: iterations });
            }
            let trial_gradient = disc.energy_gradient(&trial)?;
            let trial_norm = max_norm(&trial_gradient);
            if trial_norm < gnorm && trial_energy <= energy + 1e-14 * scale {
                if let Some(c) = &mut curvature {
                    c.update(disc, &u, &step.direction);
                }
                u = trial;
                energy = trial_energy;
                gradient = trial_gradient;
                gnorm = trial_norm;
                continue;
            }
            break StopReason::Stagnation;
        }

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=settings.max_halvings {
            let trial = axpy(&u, t, &step.direction);
            let trial_energy = disc.energy(&trial)?;
            if trial_energy.is_nan() {
                return Err(Error::NanEnergy { iteration: iterations });
            }
            if trial_energy <= energy + settings.armijo * t * slope {
                accepted = Some((trial, trial_energy));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, trial_energy)) = accepted else {
            break StopReason::LineSearch;
        };
        let step_norm = t * max_norm(&step.direction);
        if let Some(c) = &mut curvature {
            c.update(disc, &u, &step.direction);
        }
        log::trace!("newton {iterations}: energy {trial_energy:.16e} gradient {gnorm:.3e} step {t} shift {:.1e}", step.shift);
        u = trial;
        energy = trial_energy;
        gradient = disc.energy_gradient(&u)?;
        gnorm = max_norm(&gradient);
        if step_norm <= settings.step_tolerance * (1.0 + max_norm(&u)) {
            break StopReason::Step;
        }
    };
    let converged = matches!(reason, StopReason::Gradient | StopReason::Step | StopReason::Stagnation);
    let report = SolveReport {
        iterations,
        gradient_norm: gnorm,
        energy,
        converged,
        reason,
        seconds: start.elapsed().as_secs_f64(),
        max_shift,
    };
    log::debug!("newton: {report:?}");
    Ok((DgFunction { degree: init.degree, coefficients: u }, report))
}


#[cfg(test)]
mod tests {
    use super::*;
    use crate::ldg::ProblemConfig;
    use crate::mesh::{initial_lshape, BoundarySpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn disc(density: EnergyDensity, k: usize, boundary: BoundarySpec, refinements: usize) -> Discretization {
        let mut mesh = initial_lshape(boundary.clone());
        for _ in 0..refinements {
            mesh = mesh.refine_uniform().unwrap();
        }
        let cfg = ProblemConfig::new(density, k, 2.0, 1.0, ProblemConfig::constant_load(1.0), boundary).unwrap();
        Discretization::new(Arc::new(mesh), cfg).unwrap()
    }

    #[test]
    fn quadratic_energy_needs_one_newton_step() {
        let d = disc(EnergyDensity::p_laplace(2.0).unwrap(), 2, BoundarySpec::AllDirichlet, 1);
        let (u, report) = minimize(&d, &d.space.zero(), &SolverSettings::default()).unwrap();
        assert!(report.converged);
        let g = d.energy_gradient(&u.coefficients).unwrap();
        assert!(max_norm(&g) <= 1e-12, "{}", max_norm(&g));
        assert!(report.iterations <= 3, "{report:?}");
    }

    #[test]
    fn minimizer_is_locally_minimal() {
        let d = disc(EnergyDensity::p_laplace(4.0).unwrap(), 1, BoundarySpec::reentrant_corner_dirichlet(), 1);
        let (u, report) = minimize(&d, &d.space.zero(), &SolverSettings::default()).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.gradient_norm <= 1e-10 * (1.0 + d.load.coefficients.iter().fold(0.0f64, |m, x| m.max(x.abs()))));
        let e = d.energy(&u.coefficients).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            let delta: Vec<f64> = (0..d.ndof()).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            let norm = delta.iter().map(|x| x * x).sum::<f64>().sqrt();
            let v = axpy(&u.coefficients, 1e-3 * rng.random::<f64>() / norm, &delta);
            assert!(d.energy(&v).unwrap() >= e);
        }
    }

    #[test]
    fn energy_decreases_from_initial_guess_and_runs_are_reproducible() {
        let d = disc(EnergyDensity::optimal_design(1.0, 2.0, (0.0145f64).sqrt(), 2.0 * (0.0145f64).sqrt()).unwrap(), 1, BoundarySpec::AllDirichlet, 1);
        let init = d.space.project(|x| 0.1 * (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]), 4).unwrap();
        let e0 = d.energy(&init.coefficients).unwrap();
        let (u1, r1) = minimize(&d, &init, &SolverSettings::default()).unwrap();
        let (u2, _) = minimize(&d, &init, &SolverSettings::default()).unwrap();
        assert!(r1.energy <= e0);
        assert_eq!(u1, u2);
    }

    #[test]
    fn max_iterations_is_reported() {
        let d = disc(EnergyDensity::p_laplace(4.0).unwrap(), 1, BoundarySpec::AllDirichlet, 0);
        let settings = SolverSettings { max_iterations: 1, ..SolverSettings::default() };
        let (_, report) = minimize(&d, &d.space.zero(), &settings).unwrap();
        assert!(!report.converged);
        assert_eq!(report.reason, StopReason::MaxIterations);
    }

    #[test]
    fn rejects_bad_settings() {
        let d = disc(EnergyDensity::p_laplace(2.0).unwrap(), 1, BoundarySpec::AllDirichlet, 0);
        let settings = SolverSettings { gradient_tolerance: 0.0, ..SolverSettings::default() };
        assert!(minimize(&d, &d.space.zero(), &settings).is_err());
    }

    #[test]
    fn warm_start_saves_iterations() {
        let coarse = disc(EnergyDensity::p_laplace(4.0).unwrap(), 1, BoundarySpec::reentrant_corner_dirichlet(), 1);
        let fine = disc(EnergyDensity::p_laplace(4.0).unwrap(), 1, BoundarySpec::reentrant_corner_dirichlet(), 2);
        let (u, _) = minimize(&coarse, &coarse.space.zero(), &SolverSettings::default()).unwrap();
        let warm = fine.space.prolong(&coarse.space, &u).unwrap();
        let (_, cold) = minimize(&fine, &fine.space.zero(), &SolverSettings::default()).unwrap();
        let (_, hot) = minimize(&fine, &warm, &SolverSettings::default()).unwrap();
        assert!(cold.converged && hot.converged);
        assert!(hot.iterations < cold.iterations, "{} vs {}", hot.iterations, cold.iterations);
    }

    #[test]
    fn curvature_model_matches_hessian_at_consistent_flux() {
        let d = disc(EnergyDensity::bingham_regularized(1.0, 0.2, 1e-3).unwrap(), 2, BoundarySpec::AllDirichlet, 0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let u: Vec<f64> = (0..d.ndof()).map(|_| rng.random::<f64>() - 0.5).collect();
        let model = DualCurvature::new(&d, &u).unwrap();
        let exact = d.hessian_values(&u).unwrap();
        let approx = model.hessian_values(&d, &u).unwrap();
        let err = exact.iter().zip(&approx).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 1e-10 * max_norm(&exact), "{err}");
    }

    #[test]
    fn small_regularization_converges_quickly() {
        let d = disc(EnergyDensity::bingham_regularized(1.0, 0.2, 1e-5).unwrap(), 2, BoundarySpec::AllDirichlet, 1);
        let (u, report) = minimize(&d, &d.space.zero(), &SolverSettings::default()).unwrap();
        assert!(report.converged, "{report:?}");
        assert!(report.iterations <= 40, "{report:?}");
        assert!(max_norm(&d.energy_gradient(&u.coefficients).unwrap()) <= 1e-10);
    }
}
