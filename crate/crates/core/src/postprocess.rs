//! Conforming nodal average, Raviart-Thomas flux fit and the guaranteed
//! error estimator with its cellwise indicators.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::densities::EnergyDensity;
use crate::duality::DualField;
use crate::error::{Error, Result};
use crate::femspace::basis::monomial_exponents;
use crate::femspace::{edge_rule, face_basis, poly_dim, triangle_rule, DgFunction, DgSpace};
use crate::ldg::Discretization;
use crate::mesh::{FaceLabel, Mesh, Point};

/// Continuous piecewise polynomial of degree `k` given by its values at the
/// global Lagrange nodes, vanishing on the Dirichlet boundary. `dg` holds
/// the same function in the broken orthonormal basis.
#[derive(Clone, Debug)]
pub struct ConformingFunction {
    pub degree: usize,
    pub node_values: Vec<f64>,
    pub dg: DgFunction,
}

/// Global Lagrange node ids and physical positions of the P_k nodes of a cell.
fn cell_nodes(mesh: &Mesh, k: usize, cell: usize) -> Vec<(usize, Point)> {
    let nv = mesh.vertices.len();
    let nf = mesh.num_faces();
    let interior_per_cell = if k >= 3 { (k - 1) * (k - 2) / 2 } else { 0 };
    let tri = mesh.triangles[cell];
    let pts = mesh.cell_vertices(cell);
    let mut out = Vec::with_capacity(poly_dim(k));
    let mut interior = 0;
    for i in 0..=k {
        for j in 0..=k - i {
            let counts = [k - i - j, i, j];
            let x = [
                (0..3).map(|v| counts[v] as f64 * pts[v][0]).sum::<f64>() / k as f64,
                (0..3).map(|v| counts[v] as f64 * pts[v][1]).sum::<f64>() / k as f64,
            ];
            let zeros = counts.iter().filter(|&&c| c == 0).count();
            let id = match zeros {
                2 => tri[counts.iter().position(|&c| c == k).unwrap()],
                1 => {
                    let z = counts.iter().position(|&c| c == 0).unwrap();
                    let f = mesh.cell_faces[cell][z];
                    let lo = mesh.faces[f].vertices[0];
                    let p = tri.iter().position(|&v| v == lo).unwrap();
                    nv + f * (k - 1) + (k - counts[p]) - 1
                }
                _ => {
                    interior += 1;
                    nv + nf * (k - 1) + cell * interior_per_cell + interior - 1
                }
            };
            out.push((id, x));
        }
    }
    out
}

fn num_nodes(mesh: &Mesh, k: usize) -> usize {
    let interior_per_cell = if k >= 3 { (k - 1) * (k - 2) / 2 } else { 0 };
    mesh.vertices.len() + mesh.num_faces() * (k - 1) + mesh.num_cells() * interior_per_cell
}

/// Averages the cell limits of `u` at every Lagrange node; nodes on Dirichlet
/// faces are set to zero.
pub fn nodal_average(space: &DgSpace, u: &DgFunction) -> Result<ConformingFunction> {
    space.check(u)?;
    let mesh = space.mesh();
    let k = space.degree();
    let nodes: Vec<Vec<(usize, Point)>> = (0..mesh.num_cells()).into_par_iter().map(|c| cell_nodes(mesh, k, c)).collect();
    let mut sum = vec![0.0; num_nodes(mesh, k)];
    let mut count = vec![0u32; sum.len()];
    for (cell, list) in nodes.iter().enumerate() {
        for &(id, x) in list {
            sum[id] += space.eval(u, cell, x);
            count[id] += 1;
        }
    }
    let mut values: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 }).collect();
    let nv = mesh.vertices.len();
    for (f, face) in mesh.faces.iter().enumerate() {
        if face.label == FaceLabel::Dirichlet {
            values[face.vertices[0]] = 0.0;
            values[face.vertices[1]] = 0.0;
            for i in 0..k - 1 {
                values[nv + f * (k - 1) + i] = 0.0;
            }
        }
    }
    let dg = from_node_values(space, &nodes, &values)?;
    Ok(ConformingFunction { degree: k, node_values: values, dg })
}

fn from_node_values(space: &DgSpace, nodes: &[Vec<(usize, Point)>], values: &[f64]) -> Result<DgFunction> {
    let n = space.dim_per_cell();
    let blocks = (0..nodes.len())
        .into_par_iter()
        .map(|cell| {
            let mut vandermonde = DMatrix::<f64>::zeros(n, n);
            let mut rhs = DVector::<f64>::zeros(n);
            for (row, &(id, x)) in nodes[cell].iter().enumerate() {
                for (col, v) in space.basis(cell).eval(x).into_iter().enumerate() {
                    vandermonde[(row, col)] = v;
                }
                rhs[row] = values[id];
            }
            vandermonde
                .lu()
                .solve(&rhs)
                .map(|c| c.as_slice().to_vec())
                .ok_or(Error::Singular { cell, what: "Lagrange interpolation matrix" })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DgFunction { degree: space.degree(), coefficients: blocks.concat() })
}

/// Raviart-Thomas function of degree `k` on one cell in the basis
/// `P_k^2 + x~ P_k^hom` with `x~ = (x - center)/scale`.
#[derive(Clone, Debug)]
pub struct RtCell {
    pub center: Point,
    pub scale: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct RtFunction {
    pub degree: usize,
    pub cells: Vec<RtCell>,
}

/// `dim RT_k = (k+1)(k+3)` on a triangle.
pub const fn rt_dim(k: usize) -> usize {
    (k + 1) * (k + 3)
}

/// Values and divergences of the local RT basis at `x`.
fn rt_basis(k: usize, center: Point, scale: f64, x: Point) -> (Vec<[f64; 2]>, Vec<f64>) {
    let xi = [(x[0] - center[0]) / scale, (x[1] - center[1]) / scale];
    let exps = monomial_exponents(k);
    let mono = |i: u32, j: u32| xi[0].powi(i as i32) * xi[1].powi(j as i32);
    let mut values = Vec::with_capacity(rt_dim(k));
    let mut divs = Vec::with_capacity(rt_dim(k));
    for &(i, j) in &exps {
        let v = mono(i, j);
        values.push([v, 0.0]);
        divs.push(if i > 0 { i as f64 * mono(i - 1, j) / scale } else { 0.0 });
        values.push([0.0, v]);
        divs.push(if j > 0 { j as f64 * mono(i, j - 1) / scale } else { 0.0 });
    }
    for j in 0..=k as u32 {
        let v = mono(k as u32 - j, j);
        values.push([xi[0] * v, xi[1] * v]);
        divs.push((k + 2) as f64 * v / scale);
    }
    (values, divs)
}

impl RtFunction {
    pub fn eval(&self, cell: usize, x: Point) -> [f64; 2] {
        let c = &self.cells[cell];
        let (values, _) = rt_basis(self.degree, c.center, c.scale, x);
        let mut out = [0.0; 2];
        for (v, a) in values.iter().zip(&c.coefficients) {
            out[0] += a * v[0];
            out[1] += a * v[1];
        }
        out
    }

    pub fn divergence(&self, cell: usize, x: Point) -> f64 {
        let c = &self.cells[cell];
        let (_, divs) = rt_basis(self.degree, c.center, c.scale, x);
        divs.iter().zip(&c.coefficients).map(|(d, a)| d * a).sum()
    }

    /// Cellwise `|| div sigma + f_h ||_{L2(K)}`.
    pub fn divergence_residual(&self, space: &DgSpace, f_h: &DgFunction) -> Result<Vec<f64>> {
        let mesh = space.mesh();
        let rule = triangle_rule(2 * self.degree + 2)?;
        Ok((0..mesh.num_cells())
            .into_par_iter()
            .map(|cell| {
                let jac = 2.0 * mesh.areas[cell];
                rule.iter()
                    .map(|(xi, w)| {
                        let x = mesh.map_to_cell(cell, *xi);
                        let r = self.divergence(cell, x) + space.eval(f_h, cell, x);
                        w * jac * r * r
                    })
                    .sum::<f64>()
                    .sqrt()
            })
            .collect())
    }

    /// Largest normal-trace mismatch over `k+1` Gauss points on every
    /// interior face, and largest normal trace on Neumann faces.
    pub fn normal_trace_defect(&self, mesh: &Mesh) -> Result<f64> {
        let rule = edge_rule(2 * self.degree + 1)?;
        let mut worst: f64 = 0.0;
        for (f, face) in mesh.faces.iter().enumerate() {
            for t in rule.points.iter().map(|t| t[0]) {
                let x = mesh.map_to_face(f, t);
                let p = self.eval(face.plus, x);
                let pn = p[0] * face.normal[0] + p[1] * face.normal[1];
                let defect = match (face.minus, face.label) {
                    (Some(mc), _) => {
                        let m = self.eval(mc, x);
                        pn - (m[0] * face.normal[0] + m[1] * face.normal[1])
                    }
                    (None, FaceLabel::Neumann) => pn,
                    (None, _) => 0.0,
                };
                worst = worst.max(defect.abs());
            }
        }
        Ok(worst)
    }
}

/// Fits `sigma_RT in RT_k` with `Pi_S^k (sigma_RT . nu_S) = Pi_S^k tau_S` on every
/// face (zero on Neumann faces) and `Pi^{k-1} sigma_RT = Pi^{k-1} tau_M`.
pub fn rt_fit(space: &DgSpace, y: &DualField) -> Result<RtFunction> {
    let mesh = space.mesh();
    let k = space.degree();
    let m = poly_dim(k - 1);
    let dim = rt_dim(k);
    let face_rule = edge_rule(2 * k + 1)?;
    let cell_rule = triangle_rule(2 * k)?;
    let cells = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let center = mesh.centroid(cell);
            let scale = mesh.diameters[cell];
            let mut a = DMatrix::<f64>::zeros(dim, dim);
            let mut rhs = DVector::<f64>::zeros(dim);
            let mut row = 0;
            for &f in &mesh.cell_faces[cell] {
                let face = &mesh.faces[f];
                let target = y.face_projection(f);
                for j in 0..=k {
                    for (t, w) in face_rule.iter() {
                        let x = mesh.map_to_face(f, t[0]);
                        let b = face_basis(k, face.diameter, t[0])[j];
                        let (values, _) = rt_basis(k, center, scale, x);
                        for (col, v) in values.iter().enumerate() {
                            a[(row, col)] += w * face.diameter * b * (v[0] * face.normal[0] + v[1] * face.normal[1]);
                        }
                    }
                    rhs[row] = if face.label == FaceLabel::Neumann { 0.0 } else { target.moment(j) };
                    row += 1;
                }
            }
            let jac = 2.0 * mesh.areas[cell];
            let basis = space.basis(cell);
            for (xi, w) in cell_rule.iter() {
                let x = mesh.map_to_cell(cell, *xi);
                let psi = basis.eval(x);
                let (values, _) = rt_basis(k, center, scale, x);
                for d in 0..2 {
                    for j in 0..m {
                        for (col, v) in values.iter().enumerate() {
                            a[(row + d * m + j, col)] += w * jac * psi[j] * v[d];
                        }
                    }
                }
            }
            for r in 0..2 * m {
                rhs[row + r] = y.volume.projection[cell * 2 * m + r];
            }
            let coefficients = a
                .lu()
                .solve(&rhs)
                .ok_or(Error::Singular { cell, what: "Raviart-Thomas degrees of freedom" })?;
            Ok(RtCell { center, scale, coefficients: coefficients.as_slice().to_vec() })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(RtFunction { degree: k, cells })
}

/// Indicators and global quantities of the guaranteed estimator.
#[derive(Clone, Debug)]
pub struct Estimate {
    /// `eta(K)` after clipping at zero.
    pub indicators: Vec<f64>,
    /// `sum_K eta(K)` before clipping.
    pub total: f64,
    /// Most negative raw indicator (zero if none).
    pub most_negative: f64,
    /// Total magnitude removed by clipping.
    pub clipped: f64,
    /// Smallest pointwise Fenchel-Young integrand over all quadrature points.
    pub pointwise_minimum: f64,
    /// `E(v_C) = int W(grad v_C) - int f v_C`.
    pub primal: f64,
    /// `E*(sigma_RT) = -int W*(sigma_RT)`.
    pub dual: f64,
    /// Change of `eta` under a rule four degrees higher.
    pub quadrature_sensitivity: f64,
}

fn fenchel_young_integrals(
    space: &DgSpace,
    density: &EnergyDensity,
    vc: &ConformingFunction,
    rt: &RtFunction,
    degree: usize,
) -> Result<Vec<(f64, f64, f64, f64)>> {
    let mesh = space.mesh();
    let rule = triangle_rule(degree)?;
    Ok((0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let jac = 2.0 * mesh.areas[cell];
            let (mut eta, mut w_sum, mut wstar_sum) = (0.0, 0.0, 0.0);
            let mut pointwise = f64::INFINITY;
            for (xi, w) in rule.iter() {
                let x = mesh.map_to_cell(cell, *xi);
                let g = space.eval_gradient(&vc.dg, cell, x);
                let s = rt.eval(cell, x);
                let wv = density.value(g);
                let ws = density.conjugate(s);
                let integrand = wv - (g[0] * s[0] + g[1] * s[1]) + ws;
                pointwise = pointwise.min(integrand);
                eta += w * jac * integrand;
                w_sum += w * jac * wv;
                wstar_sum += w * jac * ws;
            }
            (eta, w_sum, wstar_sum, pointwise)
        })
        .collect())
}

/// `eta(K) = int_K W(grad v_C) - sigma_RT . grad v_C + W*(sigma_RT)` with the
/// `2pk+1` rule and the given density (unregularized for Bingham).
pub fn estimator(disc: &Discretization, density: &EnergyDensity, vc: &ConformingFunction, rt: &RtFunction) -> Result<Estimate> {
    let space = &disc.space;
    let degree = disc.config.nonlinear_degree();
    let parts = fenchel_young_integrals(space, density, vc, rt, degree)?;
    let raw: Vec<f64> = parts.iter().map(|p| p.0).collect();
    let total: f64 = raw.iter().sum();
    let most_negative = raw.iter().copied().fold(0.0, f64::min);
    let clipped: f64 = raw.iter().filter(|&&e| e < 0.0).map(|e| -e).sum();
    if clipped > 0.0 {
        log::info!("estimator: clipped {clipped:e} of negative indicators (most negative {most_negative:e})");
    }
    let indicators = raw.iter().map(|&e| e.max(0.0)).collect();
    let pointwise_minimum = parts.iter().map(|p| p.3).fold(f64::INFINITY, f64::min);
    let volume_w: f64 = parts.iter().map(|p| p.1).sum();
    let volume_wstar: f64 = parts.iter().map(|p| p.2).sum();

    let mesh = space.mesh();
    let load_rule = triangle_rule(degree.max(2 * disc.config.degree + 6))?;
    let loads: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|cell| {
            let jac = 2.0 * mesh.areas[cell];
            load_rule
                .iter()
                .map(|(xi, w)| {
                    let x = mesh.map_to_cell(cell, *xi);
                    w * jac * (disc.config.load)(x) * space.eval(&vc.dg, cell, x)
                })
                .sum()
        })
        .collect();
    let primal = volume_w - loads.iter().sum::<f64>();
    let dual = -volume_wstar;

    let finer: f64 = fenchel_young_integrals(space, density, vc, rt, degree + 4)?.iter().map(|p| p.0).sum();
    Ok(Estimate {
        indicators,
        total,
        most_negative,
        clipped,
        pointwise_minimum,
        primal,
        dual,
        quadrature_sensitivity: (finer - total).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::duality::{dual_variable, interp_dual};
    use crate::ldg::ProblemConfig;
    use crate::mesh::{initial_lshape, unit_square, BoundarySpec};
    use crate::solver::{minimize, SolverSettings};
    use std::sync::Arc;

    fn lshape_space(k: usize, refinements: usize, boundary: BoundarySpec) -> DgSpace {
        let mut mesh = initial_lshape(boundary);
        for _ in 0..refinements {
            mesh = mesh.refine_uniform().unwrap();
        }
        DgSpace::new(Arc::new(mesh), k).unwrap()
    }

    #[test]
    fn node_counts_and_sharing() {
        for k in 1..=4 {
            let space = lshape_space(k, 1, BoundarySpec::AllDirichlet);
            let mesh = space.mesh();
            let mut seen = vec![0; num_nodes(mesh, k)];
            for cell in 0..mesh.num_cells() {
                for (id, _) in cell_nodes(mesh, k, cell) {
                    seen[id] += 1;
                }
            }
            assert!(seen.iter().all(|&c| c > 0), "k={k}");
        }
    }

    #[test]
    fn shared_nodes_have_equal_positions() {
        let space = lshape_space(3, 1, BoundarySpec::AllDirichlet);
        let mesh = space.mesh();
        let mut pos: Vec<Option<Point>> = vec![None; num_nodes(mesh, 3)];
        for cell in 0..mesh.num_cells() {
            for (id, x) in cell_nodes(mesh, 3, cell) {
                if let Some(p) = pos[id] {
                    assert!((p[0] - x[0]).abs() < 1e-14 && (p[1] - x[1]).abs() < 1e-14);
                }
                pos[id] = Some(x);
            }
        }
    }

    #[test]
    fn average_reproduces_conforming_functions() {
        let space = DgSpace::new(Arc::new(unit_square(3, BoundarySpec::AllDirichlet)), 4).unwrap();
        let bubble = |x: Point| x[0] * (1.0 - x[0]) * x[1] * (1.0 - x[1]);
        let u = space.project(bubble, 8).unwrap();
        let vc = nodal_average(&space, &u).unwrap();
        for (a, b) in vc.dg.coefficients.iter().zip(&u.coefficients) {
            assert!((a - b).abs() < 1e-11);
        }
    }

    #[test]
    fn average_of_a_jump_is_the_mean() {
        let space = DgSpace::new(Arc::new(unit_square(1, BoundarySpec::predicate(|_| crate::mesh::BoundaryKind::Neumann))), 2).unwrap();
        let mesh = space.mesh();
        let f = (0..mesh.num_faces()).find(|&f| !mesh.faces[f].is_boundary()).unwrap();
        let face = &mesh.faces[f];
        let c = 0.8;
        let mut u = space.zero();
        let one = space.project_cell(|_| 2.0 * c, face.plus, 0, 2).unwrap();
        u.cell_mut(face.plus)[0] = one[0];
        let vc = nodal_average(&space, &u).unwrap();
        let mid = mesh.face_midpoint(f);
        assert!((space.eval(&vc.dg, face.plus, mid) - c).abs() < 1e-12);
        assert!((space.eval(&vc.dg, face.minus.unwrap(), mid) - c).abs() < 1e-12);
    }

    #[test]
    fn average_is_continuous_and_zero_on_dirichlet_boundary() {
        let space = lshape_space(2, 1, BoundarySpec::reentrant_corner_dirichlet());
        let u = space.project(|x| (3.0 * x[0]).sin() + x[1] * x[1], 6).unwrap();
        let vc = nodal_average(&space, &u).unwrap();
        let mesh = space.mesh();
        for (f, face) in mesh.faces.iter().enumerate() {
            for t in [0.0, 0.3, 0.77, 1.0] {
                let x = mesh.map_to_face(f, t);
                let p = space.eval(&vc.dg, face.plus, x);
                match face.minus {
                    Some(mc) => assert!((p - space.eval(&vc.dg, mc, x)).abs() < 1e-12),
                    None if face.label == FaceLabel::Dirichlet => assert!(p.abs() < 1e-12),
                    None => {}
                }
            }
        }
    }

    fn rt_field(k: usize, coeffs: &[f64]) -> impl Fn(Point) -> [f64; 2] + Clone + Send + Sync + 'static {
        let c = coeffs.to_vec();
        move |x| {
            let (values, _) = rt_basis(k, [0.0, 0.0], 1.0, x);
            let mut out = [0.0; 2];
            for (v, a) in values.iter().zip(&c) {
                out[0] += a * v[0];
                out[1] += a * v[1];
            }
            out
        }
    }

    #[test]
    fn fit_reproduces_raviart_thomas_fields() {
        for k in 1..=3 {
            let space = lshape_space(k, 1, BoundarySpec::AllDirichlet);
            let coeffs: Vec<f64> = (0..rt_dim(k)).map(|i| ((i * 7 + 3) % 11) as f64 / 11.0 - 0.4).collect();
            let q = rt_field(k, &coeffs);
            let y = interp_dual(&space, q.clone(), 2 * k + 2).unwrap();
            let rt = rt_fit(&space, &y).unwrap();
            let mesh = space.mesh();
            for cell in 0..mesh.num_cells() {
                let x = mesh.centroid(cell);
                let got = rt.eval(cell, [x[0] + 0.01, x[1] - 0.02]);
                let want = q([x[0] + 0.01, x[1] - 0.02]);
                assert!((got[0] - want[0]).abs() < 1e-11 && (got[1] - want[1]).abs() < 1e-11, "k={k}");
            }
            assert!(rt.normal_trace_defect(mesh).unwrap() < 1e-10);
        }
    }

    #[test]
    fn zero_data_gives_zero_flux() {
        let space = lshape_space(2, 0, BoundarySpec::AllDirichlet);
        let y = interp_dual(&space, |_| [0.0, 0.0], 4).unwrap();
        let rt = rt_fit(&space, &y).unwrap();
        assert!(rt.cells.iter().all(|c| c.coefficients.iter().all(|a| a.abs() < 1e-15)));
    }

    #[test]
    fn basis_divergence_matches_finite_differences() {
        let k = 2;
        let (c, h) = ([0.3, -0.1], 0.7);
        let x = [0.45, 0.2];
        let (_, divs) = rt_basis(k, c, h, x);
        let e = 1e-6;
        for i in 0..rt_dim(k) {
            let dx = (rt_basis(k, c, h, [x[0] + e, x[1]]).0[i][0] - rt_basis(k, c, h, [x[0] - e, x[1]]).0[i][0]) / (2.0 * e);
            let dy = (rt_basis(k, c, h, [x[0], x[1] + e]).0[i][1] - rt_basis(k, c, h, [x[0], x[1] - e]).0[i][1]) / (2.0 * e);
            assert!((dx + dy - divs[i]).abs() < 1e-7);
        }
    }

    #[test]
    fn estimator_on_a_solved_problem() {
        for (density, boundary) in [
            (EnergyDensity::p_laplace(4.0).unwrap(), BoundarySpec::reentrant_corner_dirichlet()),
            (EnergyDensity::optimal_design(1.0, 2.0, 0.0145f64.sqrt(), 2.0 * 0.0145f64.sqrt()).unwrap(), BoundarySpec::AllDirichlet),
        ] {
            let mut mesh = initial_lshape(boundary.clone());
            mesh = mesh.refine_uniform().unwrap();
            let cfg = ProblemConfig::new(density, 2, 2.0, 1.0, ProblemConfig::constant_load(1.0), boundary).unwrap();
            let disc = Discretization::new(Arc::new(mesh), cfg).unwrap();
            let (u, report) = minimize(&disc, &disc.space.zero(), &SolverSettings::default()).unwrap();
            assert!(report.converged);
            let y = dual_variable(&disc, &u).unwrap();
            let rt = rt_fit(&disc.space, &y).unwrap();
            let residual = rt.divergence_residual(&disc.space, &disc.load).unwrap();
            assert!(residual.iter().all(|&r| r < 1e-9), "{residual:?}");
            assert!(rt.normal_trace_defect(disc.mesh()).unwrap() < 1e-10);
            let vc = nodal_average(&disc.space, &u).unwrap();
            let est = estimator(&disc, &density, &vc, &rt).unwrap();
            assert!(est.total > 0.0 && est.total.is_finite());
            assert!(est.most_negative >= -1e-12 * (1.0 + est.total));
            let gap = est.primal - est.dual;
            assert!((gap - est.total).abs() <= 1e-9 * est.total.abs().max(1.0), "{gap} vs {}", est.total);
        }
    }

    #[test]
    fn estimator_vanishes_for_exact_linear_pair() {
        // u = x(1-x)/2 solves -u'' = 1 with Neumann data on y = 0, 1.
        let boundary = BoundarySpec::predicate(|x: Point| {
            if x[0].abs() < 1e-12 || (x[0] - 1.0).abs() < 1e-12 {
                crate::mesh::BoundaryKind::Dirichlet
            } else {
                crate::mesh::BoundaryKind::Neumann
            }
        });
        let mesh = unit_square(2, boundary.clone());
        let density = EnergyDensity::p_laplace(2.0).unwrap();
        let cfg = ProblemConfig::new(density, 2, 2.0, 1.0, ProblemConfig::constant_load(1.0), boundary).unwrap();
        let disc = Discretization::new(Arc::new(mesh), cfg).unwrap();
        let u = disc.space.project(|x| x[0] * (1.0 - x[0]) / 2.0, 4).unwrap();
        let vc = nodal_average(&disc.space, &u).unwrap();
        let y = interp_dual(&disc.space, |x| [0.5 - x[0], 0.0], 4).unwrap();
        let rt = rt_fit(&disc.space, &y).unwrap();
        let est = estimator(&disc, &density, &vc, &rt).unwrap();
        assert!(est.total.abs() < 1e-12, "{}", est.total);
    }
}
