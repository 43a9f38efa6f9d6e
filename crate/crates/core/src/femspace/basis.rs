use nalgebra::DMatrix;

use super::quadrature::triangle_rule;
use crate::error::{Error, Result};
use crate::mesh::{Mesh, Point};

/// `dim P_k` in two variables.
pub const fn poly_dim(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Exponents `(i, j)` of `x^i y^j`, graded by total degree.
pub fn monomial_exponents(k: usize) -> Vec<(u32, u32)> {
    let mut out = Vec::with_capacity(poly_dim(k));
    for d in 0..=k as u32 {
        for j in 0..=d {
            out.push((d - j, j));
        }
    }
    out
}

fn powers(x: f64, k: usize) -> Vec<f64> {
    let mut p = Vec::with_capacity(k + 1);
    let mut acc = 1.0;
    for _ in 0..=k {
        p.push(acc);
        acc *= x;
    }
    p
}

/// Values of the graded monomials in `xi`.
pub fn monomials(k: usize, xi: Point) -> Vec<f64> {
    let px = powers(xi[0], k);
    let py = powers(xi[1], k);
    monomial_exponents(k)
        .into_iter()
        .map(|(i, j)| px[i as usize] * py[j as usize])
        .collect()
}

/// Gradients (in `xi`) of the graded monomials.
pub fn monomial_gradients(k: usize, xi: Point) -> Vec<[f64; 2]> {
    let px = powers(xi[0], k);
    let py = powers(xi[1], k);
    monomial_exponents(k)
        .into_iter()
        .map(|(i, j)| {
            let (i, j) = (i as usize, j as usize);
            let dx = if i > 0 { i as f64 * px[i - 1] * py[j] } else { 0.0 };
            let dy = if j > 0 { j as f64 * px[i] * py[j - 1] } else { 0.0 };
            [dx, dy]
        })
        .collect()
}

/// L2(K)-orthonormal basis of P_k(K) obtained from scaled monomials
/// `((x - c)/h)^i ((y - c)/h)^j` by a lower-triangular Gram factor. The
/// first `poly_dim(m)` functions span P_m(K) for every `m <= k`.
#[derive(Clone, Debug)]
pub struct CellBasis {
    pub center: Point,
    pub scale: f64,
    pub degree: usize,
    /// Row `i` holds the monomial coefficients of basis function `i`.
    coefficients: DMatrix<f64>,
}

impl CellBasis {
    pub fn new(mesh: &Mesh, cell: usize, degree: usize) -> Result<Self> {
        let center = mesh.centroid(cell);
        let scale = mesh.diameters[cell];
        let n = poly_dim(degree);
        let rule = triangle_rule(2 * degree)?;
        let jac = 2.0 * mesh.areas[cell];
        let mut basis = CellBasis { center, scale, degree, coefficients: DMatrix::identity(n, n) };
        // Two passes of Cholesky orthonormalization keep the Gram matrix at
        // identity to rounding even when the monomial Gram is ill-conditioned.
        for _ in 0..2 {
            let mut gram = DMatrix::<f64>::zeros(n, n);
            for (xi, w) in rule.iter() {
                let x = mesh.map_to_cell(cell, *xi);
                let v = basis.eval(x);
                for i in 0..n {
                    for j in 0..=i {
                        gram[(i, j)] += w * jac * v[i] * v[j];
                    }
                }
            }
            gram.fill_upper_triangle_with_lower_triangle();
            let chol = gram.cholesky().ok_or(Error::Singular { cell, what: "cell mass matrix" })?;
            let l_inv = chol
                .l()
                .solve_lower_triangular(&DMatrix::identity(n, n))
                .ok_or(Error::Singular { cell, what: "cell mass matrix" })?;
            basis.coefficients = l_inv * &basis.coefficients;
        }
        Ok(basis)
    }

    pub fn dim(&self) -> usize {
        self.coefficients.nrows()
    }

    fn local(&self, x: Point) -> Point {
        [(x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale]
    }

    pub fn eval(&self, x: Point) -> Vec<f64> {
        let m = monomials(self.degree, self.local(x));
        let n = self.dim();
        (0..n)
            .map(|i| (0..=i).map(|j| self.coefficients[(i, j)] * m[j]).sum())
            .collect()
    }

    pub fn eval_gradients(&self, x: Point) -> Vec<[f64; 2]> {
        let g = monomial_gradients(self.degree, self.local(x));
        let n = self.dim();
        let inv = 1.0 / self.scale;
        (0..n)
            .map(|i| {
                let mut acc = [0.0; 2];
                for j in 0..=i {
                    let c = self.coefficients[(i, j)];
                    acc[0] += c * g[j][0];
                    acc[1] += c * g[j][1];
                }
                [acc[0] * inv, acc[1] * inv]
            })
            .collect()
    }
}

/// Legendre polynomials `P_0..=P_k` at `z` in `[-1, 1]`.
pub fn legendre(k: usize, z: f64) -> Vec<f64> {
    let mut p = Vec::with_capacity(k + 1);
    p.push(1.0);
    if k >= 1 {
        p.push(z);
    }
    for j in 2..=k {
        let next = ((2 * j - 1) as f64 * z * p[j - 1] - (j - 1) as f64 * p[j - 2]) / j as f64;
        p.push(next);
    }
    p
}

/// L2(S)-orthonormal Legendre basis on a face of length `length`, in the
/// arc-length fraction `t` measured from the lower-index vertex.
pub fn face_basis(k: usize, length: f64, t: f64) -> Vec<f64> {
    legendre(k, 2.0 * t - 1.0)
        .into_iter()
        .enumerate()
        .map(|(j, p)| ((2 * j + 1) as f64 / length).sqrt() * p)
        .collect()
}

/// Polynomial on a single face in the orthonormal Legendre basis.
#[derive(Clone, Debug, PartialEq)]
pub struct FacePolynomial {
    pub length: f64,
    pub coefficients: Vec<f64>,
}

impl FacePolynomial {
    pub fn zero(degree: usize, length: f64) -> Self {
        FacePolynomial { length, coefficients: vec![0.0; degree + 1] }
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn eval(&self, t: f64) -> f64 {
        face_basis(self.degree(), self.length, t)
            .iter()
            .zip(&self.coefficients)
            .map(|(b, c)| b * c)
            .sum()
    }

    /// Moment against orthonormal basis function `j` (zero above the degree).
    pub fn moment(&self, j: usize) -> f64 {
        self.coefficients.get(j).copied().unwrap_or(0.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::femspace::quadrature::edge_rule;
    use crate::mesh::{initial_lshape, BoundarySpec};

    #[test]
    fn dims() {
        assert_eq!(poly_dim(0), 1);
        assert_eq!(poly_dim(2), 6);
        assert_eq!(monomial_exponents(3).len(), 10);
        assert_eq!(monomial_exponents(2), vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]);
    }

    #[test]
    fn cell_basis_is_orthonormal() {
        let mesh = initial_lshape(BoundarySpec::AllDirichlet).refine_uniform().unwrap();
        for k in 1..=4 {
            for cell in [0, 7, 23] {
                let basis = CellBasis::new(&mesh, cell, k).unwrap();
                let rule = triangle_rule(2 * k).unwrap();
                let n = basis.dim();
                let mut gram = DMatrix::<f64>::zeros(n, n);
                for (xi, w) in rule.iter() {
                    let v = basis.eval(mesh.map_to_cell(cell, *xi));
                    for i in 0..n {
                        for j in 0..n {
                            gram[(i, j)] += w * 2.0 * mesh.areas[cell] * v[i] * v[j];
                        }
                    }
                }
                assert!((gram - DMatrix::identity(n, n)).amax() < 1e-12);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mesh = initial_lshape(BoundarySpec::AllDirichlet);
        let basis = CellBasis::new(&mesh, 2, 3).unwrap();
        let x = mesh.centroid(2);
        let g = basis.eval_gradients(x);
        let h = 1e-6;
        let xp = basis.eval([x[0] + h, x[1]]);
        let xm = basis.eval([x[0] - h, x[1]]);
        let yp = basis.eval([x[0], x[1] + h]);
        let ym = basis.eval([x[0], x[1] - h]);
        for i in 0..basis.dim() {
            assert!((g[i][0] - (xp[i] - xm[i]) / (2.0 * h)).abs() < 1e-6);
            assert!((g[i][1] - (yp[i] - ym[i]) / (2.0 * h)).abs() < 1e-6);
        }
    }

    #[test]
    fn face_basis_is_orthonormal() {
        let length = 0.7;
        let rule = edge_rule(8).unwrap();
        for i in 0..=4 {
            for j in 0..=4 {
                let ip: f64 = rule
                    .iter()
                    .map(|(t, w)| {
                        let b = face_basis(4, length, t[0]);
                        w * length * b[i] * b[j]
                    })
                    .sum();
                let expected = if i == j { 1.0 } else { 0.0 };
                assert!((ip - expected).abs() < 1e-13);
            }
        }
    }
}
