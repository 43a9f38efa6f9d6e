//! Quadrature on the reference edge `[0, 1]` and the reference triangle
//! with vertices `(0,0)`, `(1,0)`, `(0,1)`.
//!
//! Low degrees use symmetric rules; everything above degree 5 uses a
//! collapsed (Duffy) tensor product of Gauss-Legendre rules.

use crate::error::{Error, Result};

pub const MAX_DEGREE: usize = 60;

#[derive(Clone, Debug)]
pub struct QuadratureRule<const D: usize> {
    pub points: Vec<[f64; D]>,
    pub weights: Vec<f64>,
    /// Polynomials up to this total degree are integrated exactly.
    pub degree: usize,
}

pub type EdgeRule = QuadratureRule<1>;
pub type TriangleRule = QuadratureRule<2>;

impl<const D: usize> QuadratureRule<D> {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; D], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

fn check_degree(degree: usize) -> Result<()> {
    if degree > MAX_DEGREE {
        Err(Error::UnsupportedQuadrature { requested: degree, max: MAX_DEGREE })
    } else {
        Ok(())
    }
}

/// Legendre polynomial `P_n(z)` and its derivative, for `n >= 1`.
fn legendre_with_derivative(n: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    for j in 2..=n {
        let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
        p0 = p1;
        p1 = p2;
    }
    (p1, n as f64 * (z * p1 - p0) / (z * z - 1.0))
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    if n == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_with_derivative(n, z);
            let dz = p / dp;
            z -= dz;
            if dz.abs() <= 1e-16 {
                break;
            }
        }
        let (_, dp) = legendre_with_derivative(n, z);
        let weight = 2.0 / ((1.0 - z * z) * dp * dp);
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = weight;
        w[n - 1 - i] = weight;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Gauss-Legendre rule on `[0, 1]` exact up to `degree`.
pub fn edge_rule(degree: usize) -> Result<EdgeRule> {
    check_degree(degree)?;
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(EdgeRule {
        points: x.iter().map(|&xi| [0.5 * (xi + 1.0)]).collect(),
        weights: w.iter().map(|&wi| 0.5 * wi).collect(),
        degree,
    })
}

fn symmetric_orbit(points: &mut Vec<[f64; 2]>, weights: &mut Vec<f64>, a: f64, weight: f64) {
    let b = 1.0 - 2.0 * a;
    for p in [[a, a], [b, a], [a, b]] {
        points.push(p);
        weights.push(0.5 * weight);
    }
}

/// Triangle rule exact up to `degree`; weights sum to the reference area 1/2.
pub fn triangle_rule(degree: usize) -> Result<TriangleRule> {
    check_degree(degree)?;
    let mut points = Vec::new();
    let mut weights = Vec::new();
    match degree {
        0 | 1 => {
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(0.5);
        }
        2 => symmetric_orbit(&mut points, &mut weights, 1.0 / 6.0, 1.0 / 3.0),
        3 | 4 => {
            symmetric_orbit(&mut points, &mut weights, 0.445_948_490_915_965, 0.223_381_589_678_011);
            symmetric_orbit(&mut points, &mut weights, 0.091_576_213_509_771, 0.109_951_743_655_322);
        }
        5 => {
            let s15 = 15f64.sqrt();
            points.push([1.0 / 3.0, 1.0 / 3.0]);
            weights.push(0.5 * 9.0 / 40.0);
            symmetric_orbit(&mut points, &mut weights, (6.0 - s15) / 21.0, (155.0 - s15) / 1200.0);
            symmetric_orbit(&mut points, &mut weights, (6.0 + s15) / 21.0, (155.0 + s15) / 1200.0);
        }
        _ => {
            // x = u, y = v (1 - u); the Jacobian (1 - u) adds one degree in u.
            let (xu, wu) = gauss_legendre(degree.div_ceil(2) + 1);
            let (xv, wv) = gauss_legendre(degree / 2 + 1);
            for (&a, &wa) in xu.iter().zip(&wu) {
                let u = 0.5 * (a + 1.0);
                for (&b, &wb) in xv.iter().zip(&wv) {
                    let v = 0.5 * (b + 1.0);
                    points.push([u, v * (1.0 - u)]);
                    weights.push(0.25 * wa * wb * (1.0 - u));
                }
            }
        }
    }
    Ok(TriangleRule { points, weights, degree })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn factorial(n: u32) -> f64 {
        (1..=n).map(f64::from).product()
    }

    /// Exact integral of x^i y^j over the reference triangle: i! j! / (i+j+2)!
    fn monomial_integral(i: u32, j: u32) -> f64 {
        factorial(i) * factorial(j) / factorial(i + j + 2)
    }

    #[test]
    fn reference_area() {
        let rule = triangle_rule(1).unwrap();
        let area: f64 = rule.weights.iter().sum();
        assert!((area - 0.5).abs() < 1e-15);
    }

    #[test]
    fn degree_five_x2y() {
        let rule = triangle_rule(5).unwrap();
        let value: f64 = rule.iter().map(|(p, w)| w * p[0] * p[0] * p[1]).sum();
        assert!((value - 1.0 / 60.0).abs() < 1e-15);
    }

    #[test]
    fn edge_cubic() {
        let rule = edge_rule(3).unwrap();
        let value: f64 = rule.iter().map(|(p, w)| w * p[0].powi(3)).sum();
        assert!((value - 0.25).abs() < 1e-15);
    }

    #[test]
    fn triangle_rules_exact_for_all_monomials() {
        for degree in 0..=24 {
            let rule = triangle_rule(degree).unwrap();
            for i in 0..=degree as u32 {
                for j in 0..=(degree as u32 - i) {
                    let exact = monomial_integral(i, j);
                    let approx: f64 = rule.iter().map(|(p, w)| w * p[0].powi(i as i32) * p[1].powi(j as i32)).sum();
                    assert!(
                        ((approx - exact) / exact).abs() < 1e-13,
                        "degree {degree}: x^{i} y^{j}: {approx} vs {exact}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_rules_exact() {
        for degree in 0..=40 {
            let rule = edge_rule(degree).unwrap();
            for i in 0..=degree as i32 {
                let approx: f64 = rule.iter().map(|(p, w)| w * p[0].powi(i)).sum();
                let exact = 1.0 / (i as f64 + 1.0);
                assert!(((approx - exact) / exact).abs() < 1e-13, "degree {degree}, t^{i}");
            }
        }
    }

    #[test]
    fn unsupported_degree_reports_maximum() {
        let err = triangle_rule(MAX_DEGREE + 1).unwrap_err();
        assert!(err.to_string().contains(&MAX_DEGREE.to_string()));
        const { assert!(MAX_DEGREE >= 17) };
    }

    #[test]
    fn positive_weights() {
        for degree in 0..=30 {
            assert!(triangle_rule(degree).unwrap().weights.iter().all(|&w| w > 0.0));
        }
    }
}
