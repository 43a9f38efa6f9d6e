//! Discrete dual fields `(tau_M, tau_F)`, the divergence reconstruction,
//! the dual energy `E*_h` and the dual variable of a discrete minimizer.

use std::fmt;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::femspace::{edge_rule, face_basis, poly_dim, triangle_rule, DgFunction, DgSpace, EdgeRule, FacePolynomial};
use crate::ldg::{signed_power, Discretization};
use crate::mesh::{FaceLabel, Point};

pub type VolumeEval = Arc<dyn Fn(usize, Point) -> Result<[f64; 2]> + Send + Sync>;

/// Volume part `tau_M`: pointwise evaluation on each cell together with the
/// coefficients of `Pi^{k-1} tau_M` (component `d`, basis function `j` at
/// `cell * 2m + d * m + j`).
#[derive(Clone)]
pub struct VolumeField {
    pub eval: VolumeEval,
    pub projection: Vec<f64>,
}

/// Face part `tau_F`, identically zero on Neumann faces.
#[derive(Clone, Debug)]
pub enum FaceTraces {
    /// One polynomial of degree `k` per face.
    Polynomial(Vec<FacePolynomial>),
    /// Values at the points of `rule` on every face, with their `Pi_S^k`
    /// projections.
    Sampled { rule: EdgeRule, values: Vec<Vec<f64>>, projected: Vec<FacePolynomial> },
}

#[derive(Clone)]
pub struct DualField {
    pub degree: usize,
    pub volume: VolumeField,
    pub faces: FaceTraces,
}

impl fmt::Debug for DualField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DualField").field("degree", &self.degree).field("faces", &self.faces).finish_non_exhaustive()
    }
}

impl DualField {
    /// `Pi_S^k tau_S`.
    pub fn face_projection(&self, face: usize) -> &FacePolynomial {
        match &self.faces {
            FaceTraces::Polynomial(p) => &p[face],
            FaceTraces::Sampled { projected, .. } => &projected[face],
        }
    }

    /// `Pi^{k-1} tau_M` at `x` in `cell`.
    pub fn projected_volume(&self, space: &DgSpace, cell: usize, x: Point) -> [f64; 2] {
        let m = poly_dim(self.degree - 1);
        let psi = space.basis(cell).eval(x);
        let base = cell * 2 * m;
        let mut out = [0.0; 2];
        for j in 0..m {
            out[0] += psi[j] * self.volume.projection[base + j];
            out[1] += psi[j] * self.volume.projection[base + m + j];
        }
        out
    }

    /// Face quadrature `(params, weights without length, values)` on `face`,
    /// exact for products with `P_k` when the traces are polynomial.
    fn face_samples(&self, face: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        match &self.faces {
            FaceTraces::Polynomial(p) => {
                let rule = edge_rule(2 * self.degree)?;
                let params: Vec<f64> = rule.points.iter().map(|t| t[0]).collect();
                let values = params.iter().map(|&t| p[face].eval(t)).collect();
                Ok((params, rule.weights.clone(), values))
            }
            FaceTraces::Sampled { rule, values, .. } => {
                Ok((rule.points.iter().map(|t| t[0]).collect(), rule.weights.clone(), values[face].clone()))
            }
        }
    }

    /// Adds `c` to the face trace on `face` (as a constant).
    pub fn perturb_face(&mut self, face: usize, c: f64) {
        match &mut self.faces {
            FaceTraces::Polynomial(p) => {
                let length = p[face].length;
                p[face].coefficients[0] += c * length.sqrt();
            }
            FaceTraces::Sampled { values, projected, .. } => {
                for v in values[face].iter_mut() {
                    *v += c;
                }
                let length = projected[face].length;
                projected[face].coefficients[0] += c * length.sqrt();
            }
        }
    }
}

/// Components of `E*_h(tau)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DualEnergyBreakdown {
    /// `int W*(tau_M)`
    pub conjugate_volume: f64,
    /// Whether `div_h tau + f_h = 0`.
    pub feasible: bool,
    /// `|| div_h tau + f_h ||_{L2}`
    pub residual: f64,
    pub gamma: f64,
    /// `-int W*(tau_M) - gamma_h / r'`, or `-inf` if infeasible.
    pub total: f64,
}

fn volume_matrix(space: &DgSpace, cell: usize) -> Result<DMatrix<f64>> {
    let k = space.degree();
    let n = poly_dim(k);
    let m = poly_dim(k - 1);
    let mesh = space.mesh();
    let rule = triangle_rule(2 * k - 1)?;
    let jac = 2.0 * mesh.areas[cell];
    let basis = space.basis(cell);
    let mut out = DMatrix::zeros(2 * m, n);
    for (xi, w) in rule.iter() {
        let x = mesh.map_to_cell(cell, *xi);
        let vals = basis.eval(x);
        let grads = basis.eval_gradients(x);
        for j in 0..m {
            for i in 0..n {
                out[(j, i)] += w * jac * vals[j] * grads[i][0];
                out[(m + j, i)] += w * jac * vals[j] * grads[i][1];
            }
        }
    }
    Ok(out)
}

/// `div_h tau in P_k(M)`: `int div_h tau phi = -int tau_M . grad phi +
/// sum_{S not Neumann} int_S tau_S [phi]` for all `phi in P_k(M)`.
pub fn div_reconstruct(space: &DgSpace, tau: &DualField) -> Result<DgFunction> {
    let k = space.degree();
    if tau.degree != k {
        return Err(Error::Config(format!("dual field degree {} differs from space degree {k}", tau.degree)));
    }
    let mesh = space.mesh();
    let n = poly_dim(k);
    let m = poly_dim(k - 1);
    let blocks = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let v = volume_matrix(space, cell)?;
            let b = &tau.volume.projection[cell * 2 * m..(cell + 1) * 2 * m];
            let mut out = vec![0.0; n];
            for i in 0..n {
                out[i] = -(0..2 * m).map(|r| v[(r, i)] * b[r]).sum::<f64>();
            }
            for &f in &mesh.cell_faces[cell] {
                let face = &mesh.faces[f];
                if face.label == FaceLabel::Neumann {
                    continue;
                }
                let o = face.orientation(cell);
                let (params, weights, values) = tau.face_samples(f)?;
                for ((t, w), tv) in params.iter().zip(&weights).zip(&values) {
                    let x = mesh.map_to_face(f, *t);
                    let phi = space.basis(cell).eval(x);
                    let c = o * w * face.diameter * tv;
                    for i in 0..n {
                        out[i] += c * phi[i];
                    }
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DgFunction { degree: k, coefficients: blocks.concat() })
}

/// `I_h* q = (q, (Pi_S^k (q . nu_S))_S)`. Fails if `q . nu` does not vanish
/// on a Neumann face.
pub fn interp_dual<Q>(space: &DgSpace, q: Q, quad_degree: usize) -> Result<DualField>
where
    Q: Fn(Point) -> [f64; 2] + Send + Sync + 'static,
{
    let k = space.degree();
    let m = poly_dim(k - 1);
    let mesh = space.mesh();
    let q = Arc::new(q);
    let qd = quad_degree.max(2 * k);
    let projection = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let mut block = space.project_cell(|x| q(x)[0], cell, k - 1, qd)?;
            block.extend(space.project_cell(|x| q(x)[1], cell, k - 1, qd)?);
            debug_assert_eq!(block.len(), 2 * m);
            Ok(block)
        })
        .collect::<Result<Vec<_>>>()?
        .concat();
    let rule = edge_rule(qd)?;
    let faces = (0..mesh.num_faces())
        .map(|f| {
            let face = &mesh.faces[f];
            let normal_trace = |x: Point| {
                let v = q(x);
                v[0] * face.normal[0] + v[1] * face.normal[1]
            };
            if face.label == FaceLabel::Neumann {
                for t in rule.points.iter().map(|t| t[0]).chain([0.0, 1.0]) {
                    let value = normal_trace(mesh.map_to_face(f, t));
                    if value.abs() > 1e-12 {
                        return Err(Error::NeumannTrace { face: f, value });
                    }
                }
                return Ok(FacePolynomial::zero(k, face.diameter));
            }
            space.project_face(normal_trace, f, k, qd)
        })
        .collect::<Result<Vec<_>>>()?;
    let eval_q = q.clone();
    Ok(DualField {
        degree: k,
        volume: VolumeField { eval: Arc::new(move |_, x| Ok(eval_q(x))), projection },
        faces: FaceTraces::Polynomial(faces),
    })
}

/// The dual variable of `u`: `sigma_M = DW(G u)` and, on interior and
/// Dirichlet faces, `sigma_S = {Pi^{k-1} sigma_M} . nu - h^{-s}|[u]|^{r-2}[u]`.
pub fn dual_variable(disc: &Discretization, u: &DgFunction) -> Result<DualField> {
    disc.space.check(u)?;
    let k = disc.config.degree;
    let n = poly_dim(k);
    let m = poly_dim(k - 1);
    let gu = Arc::new(disc.gradient.apply(&u.coefficients));
    let projection = disc.projected_stress(&gu)?;
    let mesh = disc.mesh();
    let r = disc.config.r;

    let avg_normal = |fq: &crate::ldg::FaceQuadrature, q: usize| {
        let face = &mesh.faces[fq.face];
        let side = |cell: usize, psi: &[f64]| {
            let base = cell * 2 * m;
            let sx: f64 = (0..m).map(|j| psi[j] * projection[base + j]).sum();
            let sy: f64 = (0..m).map(|j| psi[j] * projection[base + m + j]).sum();
            sx * face.normal[0] + sy * face.normal[1]
        };
        let plus = side(fq.plus, &fq.plus_values[q]);
        match fq.minus {
            Some(mc) => 0.5 * (plus + side(mc, &fq.minus_values[q])),
            None => plus,
        }
    };
    let jump = |fq: &crate::ldg::FaceQuadrature, q: usize| {
        let value = |cell: usize, vals: &[f64]| -> f64 {
            vals.iter().zip(&u.coefficients[cell * n..(cell + 1) * n]).map(|(a, b)| a * b).sum()
        };
        let plus = value(fq.plus, &fq.plus_values[q]);
        match fq.minus {
            Some(mc) => plus - value(mc, &fq.minus_values[q]),
            None => plus,
        }
    };

    let mut sampled = vec![Vec::new(); mesh.num_faces()];
    for fq in &disc.faces {
        sampled[fq.face] = (0..fq.weights.len())
            .map(|q| avg_normal(fq, q) - fq.penalty * signed_power(jump(fq, q), r - 1.0))
            .collect();
    }
    let face_rule = edge_rule(disc.config.nonlinear_degree().max(2 * k))?;
    let project = |f: usize, values: &[f64]| {
        let length = mesh.faces[f].diameter;
        let mut poly = FacePolynomial::zero(k, length);
        if values.is_empty() {
            return poly;
        }
        for ((t, w), v) in face_rule.iter().zip(values) {
            for (c, b) in poly.coefficients.iter_mut().zip(face_basis(k, length, t[0])) {
                *c += w * length * v * b;
            }
        }
        poly
    };
    let projected: Vec<FacePolynomial> = (0..mesh.num_faces()).map(|f| project(f, &sampled[f])).collect();
    let faces = if r == 2.0 {
        FaceTraces::Polynomial(projected)
    } else {
        let values = sampled
            .into_iter()
            .map(|v| if v.is_empty() { vec![0.0; face_rule.len()] } else { v })
            .collect();
        FaceTraces::Sampled { rule: face_rule, values, projected }
    };

    let space = disc.space.clone();
    let density = disc.config.density;
    let eval: VolumeEval = Arc::new(move |cell, x| {
        let psi = space.basis(cell).eval(x);
        let base = cell * 2 * m;
        let mut a = [0.0; 2];
        for j in 0..m {
            a[0] += psi[j] * gu[base + j];
            a[1] += psi[j] * gu[base + m + j];
        }
        density.gradient(a)
    });
    Ok(DualField { degree: k, volume: VolumeField { eval, projection }, faces })
}

/// `gamma_h(tau) = sum_{S not Neumann} h_S^{s/(r-1)} int_S |tau_S - {Pi tau_M} . nu|^{r'}`.
pub fn dual_stabilization(disc: &Discretization, tau: &DualField) -> Result<f64> {
    let mesh = disc.mesh();
    let r = disc.config.r;
    let rd = disc.config.r_dual();
    let s = disc.config.s;
    let parts = disc
        .faces
        .par_iter()
        .map(|fq| {
            let face = &mesh.faces[fq.face];
            let trace = |q: usize| -> Result<f64> {
                Ok(match &tau.faces {
                    FaceTraces::Polynomial(p) => p[fq.face].eval(fq.params[q]),
                    FaceTraces::Sampled { values, .. } => {
                        let v = &values[fq.face];
                        if v.len() != fq.weights.len() {
                            return Err(Error::Dimension { expected: fq.weights.len(), got: v.len() });
                        }
                        v[q]
                    }
                })
            };
            let mut acc = 0.0;
            for q in 0..fq.weights.len() {
                let x = mesh.map_to_face(fq.face, fq.params[q]);
                let plus = tau.projected_volume(&disc.space, fq.plus, x);
                let avg = match fq.minus {
                    Some(mc) => {
                        let minus = tau.projected_volume(&disc.space, mc, x);
                        [0.5 * (plus[0] + minus[0]), 0.5 * (plus[1] + minus[1])]
                    }
                    None => plus,
                };
                let mismatch = trace(q)? - (avg[0] * face.normal[0] + avg[1] * face.normal[1]);
                acc += fq.weights[q] * mismatch.abs().powf(rd);
            }
            Ok(face.diameter.powf(s / (r - 1.0)) * acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum())
}

/// `E*_h(tau)` with its components.
pub fn dual_energy(disc: &Discretization, tau: &DualField) -> Result<DualEnergyBreakdown> {
    let density = disc.config.density;
    let volumes = (0..disc.cells.len())
        .into_par_iter()
        .map(|cell| {
            let cq = &disc.cells[cell];
            let mut acc = 0.0;
            for (x, w) in cq.points.iter().zip(&cq.weights) {
                acc += w * density.conjugate((tau.volume.eval)(cell, *x)?);
            }
            Ok(acc)
        })
        .collect::<Result<Vec<f64>>>()?;
    let conjugate_volume: f64 = volumes.iter().sum();
    let gamma = dual_stabilization(disc, tau)?;
    let div = div_reconstruct(&disc.space, tau)?;
    let residual = div
        .coefficients
        .iter()
        .zip(&disc.load.coefficients)
        .map(|(d, f)| (d + f) * (d + f))
        .sum::<f64>()
        .sqrt();
    let load_norm = disc.space.l2_norm(&disc.load);
    let feasible = residual <= 1e-9 * (1.0 + load_norm);
    let total = if feasible { -conjugate_volume - gamma / disc.config.r_dual() } else { f64::NEG_INFINITY };
    Ok(DualEnergyBreakdown { conjugate_volume, feasible, residual, gamma, total })
}
