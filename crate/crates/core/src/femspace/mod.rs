//! Broken polynomial spaces P_k(M) with per-cell orthonormal bases,
//! face polynomials, quadrature and L2 projections.

pub mod basis;
pub mod quadrature;

use std::sync::Arc;

use rayon::prelude::*;

pub use basis::{face_basis, poly_dim, CellBasis, FacePolynomial};
pub use quadrature::{edge_rule, triangle_rule, EdgeRule, QuadratureRule, TriangleRule, MAX_DEGREE};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// Coefficients of a piecewise polynomial, cell-major, with respect to the
/// orthonormal cell bases of a [`DgSpace`].
#[derive(Clone, Debug, PartialEq)]
pub struct DgFunction {
    pub degree: usize,
    pub coefficients: Vec<f64>,
}

impl DgFunction {
    pub fn zeros(degree: usize, cells: usize) -> Self {
        DgFunction { degree, coefficients: vec![0.0; cells * poly_dim(degree)] }
    }

    pub fn cell(&self, cell: usize) -> &[f64] {
        let n = poly_dim(self.degree);
        &self.coefficients[cell * n..(cell + 1) * n]
    }

    pub fn cell_mut(&mut self, cell: usize) -> &mut [f64] {
        let n = poly_dim(self.degree);
        &mut self.coefficients[cell * n..(cell + 1) * n]
    }

    pub fn len(&self) -> usize {
        self.coefficients.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coefficients.is_empty()
    }
}

/// Quadrature data of one cell: physical points, weights scaled by the
/// Jacobian, and basis values and gradients at every point.
#[derive(Clone, Debug)]
pub struct CellTable {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// `values[q][i]`
    pub values: Vec<Vec<f64>>,
    /// `gradients[q][i]`
    pub gradients: Vec<Vec<[f64; 2]>>,
}

/// Quadrature data of one face: physical points, arc-length fractions and
/// weights scaled by the face length.
#[derive(Clone, Debug)]
pub struct FaceTable {
    pub points: Vec<Point>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct DgSpace {
    mesh: Arc<Mesh>,
    degree: usize,
    bases: Vec<CellBasis>,
}

impl DgSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<Self> {
        if degree == 0 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        let bases = (0..mesh.num_cells())
            .into_par_iter()
            .map(|cell| CellBasis::new(&mesh, cell, degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(DgSpace { mesh, degree, bases })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn mesh_arc(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim_per_cell(&self) -> usize {
        poly_dim(self.degree)
    }

    pub fn ndof(&self) -> usize {
        self.mesh.num_cells() * self.dim_per_cell()
    }

    pub fn basis(&self, cell: usize) -> &CellBasis {
        &self.bases[cell]
    }

    pub fn zero(&self) -> DgFunction {
        DgFunction::zeros(self.degree, self.mesh.num_cells())
    }

    pub fn check(&self, u: &DgFunction) -> Result<()> {
        if u.degree != self.degree || u.len() != self.ndof() {
            return Err(Error::Dimension { expected: self.ndof(), got: u.len() });
        }
        Ok(())
    }

    pub fn eval(&self, u: &DgFunction, cell: usize, x: Point) -> f64 {
        let b = self.bases[cell].eval(x);
        b.iter().zip(u.cell(cell)).map(|(b, c)| b * c).sum()
    }

    pub fn eval_gradient(&self, u: &DgFunction, cell: usize, x: Point) -> [f64; 2] {
        let g = self.bases[cell].eval_gradients(x);
        let mut out = [0.0; 2];
        for (gi, c) in g.iter().zip(u.cell(cell)) {
            out[0] += gi[0] * c;
            out[1] += gi[1] * c;
        }
        out
    }

    pub fn cell_table(&self, cell: usize, rule: &TriangleRule) -> CellTable {
        let jac = 2.0 * self.mesh.areas[cell];
        let basis = &self.bases[cell];
        let mut table = CellTable {
            points: Vec::with_capacity(rule.len()),
            weights: Vec::with_capacity(rule.len()),
            values: Vec::with_capacity(rule.len()),
            gradients: Vec::with_capacity(rule.len()),
        };
        for (xi, w) in rule.iter() {
            let x = self.mesh.map_to_cell(cell, *xi);
            table.points.push(x);
            table.weights.push(w * jac);
            table.values.push(basis.eval(x));
            table.gradients.push(basis.eval_gradients(x));
        }
        table
    }

    pub fn face_table(&self, face: usize, rule: &EdgeRule) -> FaceTable {
        let length = self.mesh.faces[face].diameter;
        FaceTable {
            points: rule.points.iter().map(|t| self.mesh.map_to_face(face, t[0])).collect(),
            params: rule.points.iter().map(|t| t[0]).collect(),
            weights: rule.weights.iter().map(|w| w * length).collect(),
        }
    }

    /// L2 projection of `f` onto P_m(K), `m <= k`, as coefficients of the
    /// first `poly_dim(m)` orthonormal basis functions.
    pub fn project_cell<F>(&self, f: F, cell: usize, m: usize, quad_degree: usize) -> Result<Vec<f64>>
    where
        F: Fn(Point) -> f64,
    {
        if m > self.degree {
            return Err(Error::Config(format!("projection degree {m} exceeds space degree {}", self.degree)));
        }
        let rule = triangle_rule(quad_degree.max(2 * self.degree))?;
        let n = poly_dim(m);
        let jac = 2.0 * self.mesh.areas[cell];
        let mut out = vec![0.0; n];
        for (xi, w) in rule.iter() {
            let x = self.mesh.map_to_cell(cell, *xi);
            let fx = f(x);
            let b = self.bases[cell].eval(x);
            for i in 0..n {
                out[i] += w * jac * fx * b[i];
            }
        }
        Ok(out)
    }

    /// Global L2 projection onto P_k(M).
    pub fn project<F>(&self, f: F, quad_degree: usize) -> Result<DgFunction>
    where
        F: Fn(Point) -> f64 + Sync,
    {
        let blocks = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|cell| self.project_cell(&f, cell, self.degree, quad_degree))
            .collect::<Result<Vec<_>>>()?;
        Ok(DgFunction { degree: self.degree, coefficients: blocks.concat() })
    }

    /// L2 projection of `g` onto P_k(S) in the face's Legendre basis.
    pub fn project_face<F>(&self, g: F, face: usize, k: usize, quad_degree: usize) -> Result<FacePolynomial>
    where
        F: Fn(Point) -> f64,
    {
        let rule = edge_rule(quad_degree.max(2 * k))?;
        let length = self.mesh.faces[face].diameter;
        let mut poly = FacePolynomial::zero(k, length);
        for (t, w) in rule.iter() {
            let gx = g(self.mesh.map_to_face(face, t[0]));
            for (c, b) in poly.coefficients.iter_mut().zip(face_basis(k, length, t[0])) {
                *c += w * length * gx * b;
            }
        }
        Ok(poly)
    }

    /// Jump and average of `v` across `face` at the given points.
    /// On boundary faces both equal the trace from the single adjacent cell.
    pub fn trace_values(&self, v: &DgFunction, face: usize, points: &[Point]) -> Result<Vec<(f64, f64)>> {
        self.check(v)?;
        let f = &self.mesh.faces[face];
        points
            .iter()
            .map(|&x| {
                self.mesh.face_parameter(face, x)?;
                let plus = self.eval(v, f.plus, x);
                Ok(match f.minus {
                    Some(m) => {
                        let minus = self.eval(v, m, x);
                        (plus - minus, 0.5 * (plus + minus))
                    }
                    None => (plus, plus),
                })
            })
            .collect()
    }

    pub fn l2_norm(&self, u: &DgFunction) -> f64 {
        u.coefficients.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// Transfers `u`, defined on the mesh this one was refined from, by
    /// cellwise L2 projection. Exact because the spaces are nested.
    pub fn prolong(&self, coarse: &DgSpace, u: &DgFunction) -> Result<DgFunction> {
        coarse.check(u)?;
        let k = self.degree.min(u.degree);
        let blocks = (0..self.mesh.num_cells())
            .into_par_iter()
            .map(|cell| {
                let parent = self.mesh.parent[cell];
                let mut block = self.project_cell(|x| coarse.eval(u, parent, x), cell, k, 2 * self.degree)?;
                block.resize(self.dim_per_cell(), 0.0);
                Ok(block)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(DgFunction { degree: self.degree, coefficients: blocks.concat() })
    }
}
