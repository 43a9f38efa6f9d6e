//! Lifted discrete gradient, jump stabilization and the discrete energy
//! `E_h(u) = int W(G u) - int f_h u + s_h(u)/r` with exact derivatives.

use std::fmt;
use std::sync::Arc;

use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::densities::EnergyDensity;
use crate::error::{Error, Result};
use crate::femspace::{edge_rule, poly_dim, triangle_rule, DgFunction, DgSpace};
use crate::mesh::{BoundarySpec, FaceLabel, Mesh, Point};

pub type Load = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Density, discretization parameters and data of one minimization problem.
#[derive(Clone)]
pub struct ProblemConfig {
    pub density: EnergyDensity,
    pub degree: usize,
    /// Stabilization exponent `r`.
    pub r: f64,
    /// Stabilization power `s` of the weight `h_S^{-s}`.
    pub s: f64,
    pub load: Load,
    pub boundary: BoundarySpec,
}

impl fmt::Debug for ProblemConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemConfig")
            .field("density", &self.density)
            .field("degree", &self.degree)
            .field("r", &self.r)
            .field("s", &self.s)
            .field("boundary", &self.boundary)
            .finish_non_exhaustive()
    }
}

impl ProblemConfig {
    pub fn new(density: EnergyDensity, degree: usize, r: f64, s: f64, load: Load, boundary: BoundarySpec) -> Result<Self> {
        let cfg = ProblemConfig { density, degree, r, s, load, boundary };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn constant_load(value: f64) -> Load {
        Arc::new(move |_| value)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree == 0 {
            return Err(Error::Config("polynomial degree must be at least 1".into()));
        }
        if !(self.r > 1.0 && self.r.is_finite()) {
            return Err(Error::Config(format!("stabilization exponent must satisfy 1 < r < infinity (got {})", self.r)));
        }
        if !self.s.is_finite() {
            return Err(Error::Config(format!("stabilization power must be finite (got {})", self.s)));
        }
        Ok(())
    }

    /// Regularization parameter of the density (zero if none).
    pub fn epsilon(&self) -> f64 {
        match self.density {
            EnergyDensity::Bingham(b) => b.epsilon,
            _ => 0.0,
        }
    }

    /// Hoelder conjugate `r' = r/(r-1)`.
    pub fn r_dual(&self) -> f64 {
        self.r / (self.r - 1.0)
    }

    /// Exactness degree `2pk+1` used for every nonlinear integrand.
    pub fn nonlinear_degree(&self) -> usize {
        (2.0 * self.density.growth() * self.degree as f64 + 1.0).ceil() as usize
    }
}

/// Block-sparse discrete gradient `G: P_k(M) -> P_{k-1}(M)^2`.
///
/// Output coefficients are cell-major; within a cell, component `d` of basis
/// function `j` sits at `d * m + j` with `m = dim P_{k-1}`. Row block `K`
/// depends on the coefficients of `K` and its face neighbours (the stencil).
#[derive(Clone, Debug)]
pub struct DiscreteGradient {
    degree: usize,
    stencils: Vec<Vec<usize>>,
    blocks: Vec<DMatrix<f64>>,
}

impl DiscreteGradient {
    pub fn assemble(space: &DgSpace) -> Result<Self> {
        let mesh = space.mesh();
        let k = space.degree();
        let n = poly_dim(k);
        let m = poly_dim(k - 1);
        let cell_rule = triangle_rule(2 * k - 1)?;
        let face_rule = edge_rule(2 * k)?;
        let (stencils, blocks): (Vec<_>, Vec<_>) = (0..mesh.num_cells())
            .into_par_iter()
            .map(|cell| {
                let mut stencil = vec![cell];
                stencil.extend(mesh.neighbors(cell));
                let mut block = DMatrix::<f64>::zeros(2 * m, n * stencil.len());
                let basis = space.basis(cell);
                let jac = 2.0 * mesh.areas[cell];
                for (xi, w) in cell_rule.iter() {
                    let x = mesh.map_to_cell(cell, *xi);
                    let vals = basis.eval(x);
                    let grads = basis.eval_gradients(x);
                    for j in 0..m {
                        for i in 0..n {
                            for d in 0..2 {
                                block[(d * m + j, i)] += w * jac * vals[j] * grads[i][d];
                            }
                        }
                    }
                }
                for &f in &mesh.cell_faces[cell] {
                    let face = &mesh.faces[f];
                    if face.label == FaceLabel::Neumann {
                        continue;
                    }
                    let o = face.orientation(cell);
                    let normal = [o * face.normal[0], o * face.normal[1]];
                    let neighbor = face
                        .neighbor(cell)
                        .map(|nb| (nb, stencil.iter().position(|&c| c == nb).unwrap()));
                    let share = if neighbor.is_some() { 0.5 } else { 1.0 };
                    for (t, w) in face_rule.iter() {
                        let x = mesh.map_to_face(f, t[0]);
                        let wl = w * face.diameter * share;
                        let own = basis.eval(x);
                        let other = neighbor.map(|(nb, _)| space.basis(nb).eval(x));
                        for j in 0..m {
                            for d in 0..2 {
                                let c = wl * own[j] * normal[d];
                                for i in 0..n {
                                    block[(d * m + j, i)] -= c * own[i];
                                }
                                if let (Some((_, pos)), Some(vals)) = (neighbor, &other) {
                                    for i in 0..n {
                                        block[(d * m + j, pos * n + i)] += c * vals[i];
                                    }
                                }
                            }
                        }
                    }
                }
                (stencil, block)
            })
            .unzip();
        Ok(DiscreteGradient { degree: k, stencils, blocks })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn num_cells(&self) -> usize {
        self.stencils.len()
    }

    /// Input dimension per cell, `dim P_k`.
    pub fn input_block(&self) -> usize {
        poly_dim(self.degree)
    }

    /// Output dimension per cell, `2 dim P_{k-1}`.
    pub fn output_block(&self) -> usize {
        2 * poly_dim(self.degree - 1)
    }

    pub fn nrows(&self) -> usize {
        self.num_cells() * self.output_block()
    }

    pub fn ncols(&self) -> usize {
        self.num_cells() * self.input_block()
    }

    pub fn stencil(&self, cell: usize) -> &[usize] {
        &self.stencils[cell]
    }

    pub fn block(&self, cell: usize) -> &DMatrix<f64> {
        &self.blocks[cell]
    }

    /// Gathers the coefficients of `u` on the stencil of `cell`.
    pub fn gather(&self, cell: usize, u: &[f64]) -> Vec<f64> {
        let n = self.input_block();
        self.stencils[cell].iter().flat_map(|&c| u[c * n..(c + 1) * n].iter().copied()).collect()
    }

    pub fn apply_cell(&self, cell: usize, u: &[f64]) -> Vec<f64> {
        let local = self.gather(cell, u);
        let block = &self.blocks[cell];
        (0..block.nrows()).map(|r| (0..block.ncols()).map(|c| block[(r, c)] * local[c]).sum()).collect()
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.ncols());
        (0..self.num_cells()).into_par_iter().flat_map_iter(|cell| self.apply_cell(cell, u)).collect()
    }

    pub fn apply_transpose(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.nrows());
        let n = self.input_block();
        let o = self.output_block();
        let locals: Vec<Vec<f64>> = (0..self.num_cells())
            .into_par_iter()
            .map(|cell| self.blocks[cell].tr_mul(&nalgebra::DVector::from_column_slice(&b[cell * o..(cell + 1) * o])).as_slice().to_vec())
            .collect();
        let mut out = vec![0.0; self.ncols()];
        for (cell, local) in locals.iter().enumerate() {
            for (s, &c) in self.stencils[cell].iter().enumerate() {
                for i in 0..n {
                    out[c * n + i] += local[s * n + i];
                }
            }
        }
        out
    }

    /// Nonzero entries `(row, column, value)` in global numbering.
    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let n = self.input_block();
        let o = self.output_block();
        let mut out = Vec::new();
        for (cell, block) in self.blocks.iter().enumerate() {
            for (s, &c) in self.stencils[cell].iter().enumerate() {
                for r in 0..o {
                    for i in 0..n {
                        let v = block[(r, s * n + i)];
                        if v != 0.0 {
                            out.push((cell * o + r, c * n + i, v));
                        }
                    }
                }
            }
        }
        out
    }
}

/// Quadrature data of one cell for the nonlinear volume term.
#[derive(Clone, Debug)]
pub struct CellQuadrature {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    /// Values of the first `dim P_{k-1}` basis functions, `psi[q][j]`.
    pub psi: Vec<Vec<f64>>,
}

/// Quadrature data of one face carrying the jump penalty.
#[derive(Clone, Debug)]
pub struct FaceQuadrature {
    pub face: usize,
    pub plus: usize,
    pub minus: Option<usize>,
    pub params: Vec<f64>,
    pub weights: Vec<f64>,
    pub plus_values: Vec<Vec<f64>>,
    pub minus_values: Vec<Vec<f64>>,
    /// `h_S^{-s}`
    pub penalty: f64,
}

impl FaceQuadrature {
    fn jump(&self, u: &[f64], n: usize, q: usize) -> f64 {
        let plus: f64 = self.plus_values[q].iter().zip(&u[self.plus * n..(self.plus + 1) * n]).map(|(a, b)| a * b).sum();
        match self.minus {
            Some(mc) => {
                let minus: f64 = self.minus_values[q].iter().zip(&u[mc * n..(mc + 1) * n]).map(|(a, b)| a * b).sum();
                plus - minus
            }
            None => plus,
        }
    }

    /// Global dofs touched by this face with the sign of `[phi]`.
    fn dofs(&self, n: usize, q: usize) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = (0..n).map(|i| (self.plus * n + i, self.plus_values[q][i])).collect();
        if let Some(mc) = self.minus {
            out.extend((0..n).map(|i| (mc * n + i, -self.minus_values[q][i])));
        }
        out
    }
}

/// Lower-triangular CSC pattern of the Hessian together with its symbolic
/// structure.
#[derive(Clone, Debug)]
pub struct HessianPattern {
    symbolic: SymbolicSparseColMat<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
}

impl HessianPattern {
    fn new(gradient: &DiscreteGradient) -> Self {
        let n = gradient.input_block();
        let ncols = gradient.ncols();
        let mut columns: Vec<Vec<usize>> = vec![Vec::new(); ncols];
        for cell in 0..gradient.num_cells() {
            let dofs: Vec<usize> = gradient.stencil(cell).iter().flat_map(|&c| c * n..(c + 1) * n).collect();
            for &col in &dofs {
                for &row in &dofs {
                    if row >= col {
                        columns[col].push(row);
                    }
                }
            }
        }
        let mut col_ptr = Vec::with_capacity(ncols + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in columns.iter_mut() {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let symbolic = SymbolicSparseColMat::new_checked(ncols, ncols, col_ptr.clone(), None, row_idx.clone());
        HessianPattern { symbolic, col_ptr, row_idx }
    }

    pub fn symbolic(&self) -> &SymbolicSparseColMat<usize> {
        &self.symbolic
    }

    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    pub fn dim(&self) -> usize {
        self.col_ptr.len() - 1
    }

    fn position(&self, row: usize, col: usize) -> usize {
        let (lo, hi) = (self.col_ptr[col], self.col_ptr[col + 1]);
        lo + self.row_idx[lo..hi].binary_search(&row).expect("entry outside Hessian pattern")
    }

    fn add(&self, values: &mut [f64], row: usize, col: usize, v: f64) {
        if row >= col {
            values[self.position(row, col)] += v;
        }
    }

    pub fn diagonal_positions(&self) -> Vec<usize> {
        (0..self.dim()).map(|i| self.position(i, i)).collect()
    }

    pub fn matrix<'a>(&'a self, values: &'a [f64]) -> SparseColMatRef<'a, usize, f64> {
        SparseColMatRef::new(self.symbolic.as_ref(), values)
    }

    /// `y = H x` for the symmetric matrix stored by its lower triangle.
    pub fn symmetric_apply(&self, values: &[f64], x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; x.len()];
        for col in 0..self.dim() {
            for p in self.col_ptr[col]..self.col_ptr[col + 1] {
                let row = self.row_idx[p];
                y[row] += values[p] * x[col];
                if row != col {
                    y[col] += values[p] * x[row];
                }
            }
        }
        y
    }
}

/// The discrete problem on one mesh: space, discrete gradient, projected
/// load and cached quadrature tables.
pub struct Discretization {
    pub space: Arc<DgSpace>,
    pub config: ProblemConfig,
    pub gradient: DiscreteGradient,
    /// `f_h = Pi^k f`; in the orthonormal basis also the load vector.
    pub load: DgFunction,
    pub(crate) cells: Vec<CellQuadrature>,
    pub(crate) faces: Vec<FaceQuadrature>,
    pattern: std::sync::OnceLock<HessianPattern>,
}

/// Components of `E_h(u)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyBreakdown {
    pub volume: f64,
    pub load: f64,
    pub stabilization: f64,
    pub total: f64,
}

impl Discretization {
    pub fn new(mesh: Arc<Mesh>, config: ProblemConfig) -> Result<Self> {
        config.validate()?;
        let space = Arc::new(DgSpace::new(mesh, config.degree)?);
        Self::with_space(space, config)
    }

    pub fn with_space(space: Arc<DgSpace>, config: ProblemConfig) -> Result<Self> {
        config.validate()?;
        if space.degree() != config.degree {
            return Err(Error::Config(format!("space degree {} differs from configured degree {}", space.degree(), config.degree)));
        }
        let k = config.degree;
        let m = poly_dim(k - 1);
        let qd = config.nonlinear_degree();
        let gradient = DiscreteGradient::assemble(&space)?;
        let load = {
            let f = config.load.clone();
            space.project(move |x| f(x), qd.max(2 * k + 6))?
        };
        let mesh = space.mesh();
        let rule = triangle_rule(qd)?;
        let cells = (0..mesh.num_cells())
            .into_par_iter()
            .map(|cell| {
                let table = space.cell_table(cell, &rule);
                CellQuadrature {
                    points: table.points,
                    weights: table.weights,
                    psi: table.values.into_iter().map(|mut v| {
                        v.truncate(m);
                        v
                    }).collect(),
                }
            })
            .collect();
        let face_rule = edge_rule(qd.max(2 * k))?;
        let faces = (0..mesh.num_faces())
            .into_par_iter()
            .filter(|&f| mesh.faces[f].is_penalized())
            .map(|f| {
                let face = &mesh.faces[f];
                let table = space.face_table(f, &face_rule);
                let plus_values = table.points.iter().map(|&x| space.basis(face.plus).eval(x)).collect();
                let minus_values = match face.minus {
                    Some(mc) => table.points.iter().map(|&x| space.basis(mc).eval(x)).collect(),
                    None => Vec::new(),
                };
                FaceQuadrature {
                    face: f,
                    plus: face.plus,
                    minus: face.minus,
                    params: table.params,
                    weights: table.weights,
                    plus_values,
                    minus_values,
                    penalty: face.diameter.powf(-config.s),
                }
            })
            .collect();
        Ok(Discretization { space, config, gradient, load, cells, faces, pattern: std::sync::OnceLock::new() })
    }

    pub fn mesh(&self) -> &Mesh {
        self.space.mesh()
    }

    pub fn ndof(&self) -> usize {
        self.space.ndof()
    }

    pub fn hessian_pattern(&self) -> &HessianPattern {
        self.pattern.get_or_init(|| HessianPattern::new(&self.gradient))
    }

    fn check(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.ndof() {
            return Err(Error::Dimension { expected: self.ndof(), got: u.len() });
        }
        Ok(())
    }

    fn m(&self) -> usize {
        poly_dim(self.config.degree - 1)
    }

    /// Value of the piecewise polynomial `G u` at quadrature point `q` of `cell`.
    pub(crate) fn gradient_at(&self, gu: &[f64], cell: usize, q: usize) -> [f64; 2] {
        let m = self.m();
        let base = cell * 2 * m;
        let psi = &self.cells[cell].psi[q];
        let mut a = [0.0; 2];
        for j in 0..m {
            a[0] += psi[j] * gu[base + j];
            a[1] += psi[j] * gu[base + m + j];
        }
        a
    }

    /// Number of volume quadrature points in `cell`.
    pub fn cell_quadrature_len(&self, cell: usize) -> usize {
        self.cells[cell].weights.len()
    }

    /// `G u` evaluated at an arbitrary point of `cell`.
    pub fn eval_discrete_gradient(&self, gu: &[f64], cell: usize, x: Point) -> [f64; 2] {
        let m = self.m();
        let psi = self.space.basis(cell).eval(x);
        let base = cell * 2 * m;
        let mut a = [0.0; 2];
        for j in 0..m {
            a[0] += psi[j] * gu[base + j];
            a[1] += psi[j] * gu[base + m + j];
        }
        a
    }

    /// `int W(G u)` by the `2pk+1` rule.
    pub fn volume_energy(&self, gu: &[f64]) -> Result<f64> {
        let parts = (0..self.cells.len())
            .into_par_iter()
            .map(|cell| {
                let cq = &self.cells[cell];
                let mut acc = 0.0;
                for q in 0..cq.weights.len() {
                    acc += cq.weights[q] * self.config.density.value(self.gradient_at(gu, cell, q));
                }
                if acc.is_finite() {
                    Ok(acc)
                } else {
                    Err(Error::NonFinite { cell })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(parts.iter().sum())
    }

    /// `s_h(v; w) = sum h_S^{-s} int_S |[v]|^{r-2} [v] [w]` over interior and
    /// Dirichlet faces.
    pub fn stabilization(&self, v: &[f64], w: &[f64]) -> Result<f64> {
        self.check(v)?;
        self.check(w)?;
        let n = self.space.dim_per_cell();
        let r = self.config.r;
        let parts: Vec<f64> = self
            .faces
            .par_iter()
            .map(|fq| {
                let mut acc = 0.0;
                for q in 0..fq.weights.len() {
                    let jv = fq.jump(v, n, q);
                    let jw = fq.jump(w, n, q);
                    acc += fq.weights[q] * signed_power(jv, r - 1.0) * jw;
                }
                fq.penalty * acc
            })
            .collect();
        Ok(parts.iter().sum())
    }

    pub fn energy_breakdown(&self, u: &[f64]) -> Result<EnergyBreakdown> {
        self.check(u)?;
        let gu = self.gradient.apply(u);
        let volume = self.volume_energy(&gu)?;
        let load: f64 = self.load.coefficients.iter().zip(u).map(|(f, u)| f * u).sum();
        let stabilization = self.stabilization(u, u)?;
        let total = volume - load + stabilization / self.config.r;
        Ok(EnergyBreakdown { volume, load, stabilization, total })
    }

    pub fn energy(&self, u: &[f64]) -> Result<f64> {
        Ok(self.energy_breakdown(u)?.total)
    }

    /// Coefficients of `Pi^{k-1} DW(G u)` in the layout of `G u`.
    pub fn projected_stress(&self, gu: &[f64]) -> Result<Vec<f64>> {
        let m = self.m();
        let blocks = (0..self.cells.len())
            .into_par_iter()
            .map(|cell| {
                let cq = &self.cells[cell];
                let mut b = vec![0.0; 2 * m];
                for q in 0..cq.weights.len() {
                    let s = self.config.density.gradient(self.gradient_at(gu, cell, q))?;
                    for j in 0..m {
                        b[j] += cq.weights[q] * s[0] * cq.psi[q][j];
                        b[m + j] += cq.weights[q] * s[1] * cq.psi[q][j];
                    }
                }
                Ok(b)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(blocks.concat())
    }

    /// Derivative of `s_h(u)/r`, i.e. `s_h(u; phi_i)` for every basis function.
    pub fn stabilization_gradient(&self, u: &[f64]) -> Vec<f64> {
        let n = self.space.dim_per_cell();
        let r = self.config.r;
        let locals: Vec<Vec<(usize, f64)>> = self
            .faces
            .par_iter()
            .map(|fq| {
                let mut out = Vec::new();
                for q in 0..fq.weights.len() {
                    let c = fq.penalty * fq.weights[q] * signed_power(fq.jump(u, n, q), r - 1.0);
                    out.extend(fq.dofs(n, q).into_iter().map(|(i, phi)| (i, c * phi)));
                }
                out
            })
            .collect();
        let mut g = vec![0.0; self.ndof()];
        for local in locals {
            for (i, v) in local {
                g[i] += v;
            }
        }
        g
    }

    /// `DE_h(u) = G^T Pi^{k-1} DW(G u) + s_h(u; .) - F`.
    pub fn energy_gradient(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check(u)?;
        let gu = self.gradient.apply(u);
        let b = self.projected_stress(&gu)?;
        let mut g = self.gradient.apply_transpose(&b);
        for (gi, si) in g.iter_mut().zip(self.stabilization_gradient(u)) {
            *gi += si;
        }
        for (gi, fi) in g.iter_mut().zip(&self.load.coefficients) {
            *gi -= fi;
        }
        Ok(g)
    }

    /// Values of the lower triangle of `D^2 E_h(u)` in [`Self::hessian_pattern`].
    pub fn hessian_values(&self, u: &[f64]) -> Result<Vec<f64>> {
        let density = &self.config.density;
        self.hessian_values_with(u, |_, _, a| density.hessian(a))
    }

    /// Hessian values with the density curvature at volume quadrature point
    /// `q` of `cell` supplied by `curvature(cell, q, a)`, `a` being the
    /// discrete gradient there.
    pub fn hessian_values_with<H>(&self, u: &[f64], curvature: H) -> Result<Vec<f64>>
    where
        H: Fn(usize, usize, [f64; 2]) -> Result<[[f64; 2]; 2]> + Sync,
    {
        self.check(u)?;
        let pattern = self.hessian_pattern();
        let gu = self.gradient.apply(u);
        let n = self.space.dim_per_cell();
        let m = self.m();
        let mut values = vec![0.0; pattern.nnz()];
        let chunk = 2048;
        for start in (0..self.cells.len()).step_by(chunk) {
            let end = (start + chunk).min(self.cells.len());
            let blocks = (start..end)
                .into_par_iter()
                .map(|cell| {
                    let cq = &self.cells[cell];
                    let mut d = DMatrix::<f64>::zeros(2 * m, 2 * m);
                    for q in 0..cq.weights.len() {
                        let h = curvature(cell, q, self.gradient_at(&gu, cell, q))?;
                        let psi = &cq.psi[q];
                        for a in 0..2 {
                            for b in 0..2 {
                                let c = cq.weights[q] * h[a][b];
                                if c == 0.0 {
                                    continue;
                                }
                                for i in 0..m {
                                    for j in 0..m {
                                        d[(a * m + i, b * m + j)] += c * psi[i] * psi[j];
                                    }
                                }
                            }
                        }
                    }
                    let g = self.gradient.block(cell);
                    Ok(g.transpose() * d * g)
                })
                .collect::<Result<Vec<_>>>()?;
            for (offset, local) in blocks.iter().enumerate() {
                let cell = start + offset;
                let dofs: Vec<usize> = self.gradient.stencil(cell).iter().flat_map(|&c| c * n..(c + 1) * n).collect();
                for (a, &ra) in dofs.iter().enumerate() {
                    for (b, &cb) in dofs.iter().enumerate() {
                        pattern.add(&mut values, ra, cb, local[(a, b)]);
                    }
                }
            }
        }
        let r = self.config.r;
        for fq in &self.faces {
            for q in 0..fq.weights.len() {
                let jump = fq.jump(u, n, q).abs();
                let weight = if r == 2.0 {
                    1.0
                } else {
                    (r - 1.0) * jump.max(1e-14).powf(r - 2.0)
                };
                let c = fq.penalty * fq.weights[q] * weight;
                let dofs = fq.dofs(n, q);
                for &(i, pi) in &dofs {
                    for &(j, pj) in &dofs {
                        pattern.add(&mut values, i, j, c * pi * pj);
                    }
                }
            }
        }
        Ok(values)
    }

    /// `D^2 E_h(u) v`.
    pub fn hessian_apply(&self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check(v)?;
        let values = self.hessian_values(u)?;
        Ok(self.hessian_pattern().symmetric_apply(&values, v))
    }
}

/// `|x|^e sign(x)`.
pub(crate) fn signed_power(x: f64, e: f64) -> f64 {
    if e == 1.0 {
        x
    } else if x == 0.0 {
        0.0
    } else {
        x.signum() * x.abs().powf(e)
    }
}
