//! Convex energy densities `W: R^2 -> R` with derivatives and convex conjugates.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vector = [f64; 2];
pub type Matrix = [[f64; 2]; 2];

/// Radii within this distance of a kink use the branch from below.
const KINK_TOL: f64 = 1e-12;

fn norm(a: Vector) -> f64 {
    a[0].hypot(a[1])
}

fn scale(a: Vector, s: f64) -> Vector {
    [a[0] * s, a[1] * s]
}

/// Hessian of a radial function `w(|a|)`: `w'' e e^T + (w'/t)(I - e e^T)`.
fn radial_hessian(a: Vector, t: f64, w1: f64, w2: f64) -> Matrix {
    let e = [a[0] / t, a[1] / t];
    let tangential = w1 / t;
    let mut h = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let id = if i == j { 1.0 } else { 0.0 };
            h[i][j] = w2 * e[i] * e[j] + tangential * (id - e[i] * e[j]);
        }
    }
    h
}

/// `W(a) = |a|^p / p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PLaplace {
    pub p: f64,
}

/// Two-material optimal design density with radial profile
/// `w(t) = mu2 t^2/2` on `[0, t1]`, `t1 mu2 (t - t1/2)` on `[t1, t2]` and
/// `mu1 t^2/2 + t1 mu2 (t2/2 - t1/2)` beyond `t2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimalDesign {
    pub mu1: f64,
    pub mu2: f64,
    pub t1: f64,
    pub t2: f64,
}

/// `W(a) = mu |a|^2/2 + g sqrt(|a|^2 + eps^2)`; `eps = 0` is the
/// non-smooth Bingham density `mu |a|^2/2 + g |a|`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bingham {
    pub mu: f64,
    pub g: f64,
    pub epsilon: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnergyDensity {
    PLaplace(PLaplace),
    OptimalDesign(OptimalDesign),
    Bingham(Bingham),
}

impl PLaplace {
    fn dual_exponent(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    fn value(&self, a: Vector) -> f64 {
        norm(a).powf(self.p) / self.p
    }

    fn gradient(&self, a: Vector) -> Vector {
        let t = norm(a);
        if t == 0.0 {
            return [0.0; 2];
        }
        scale(a, t.powf(self.p - 2.0))
    }

    fn hessian(&self, a: Vector) -> Result<Matrix> {
        let t = norm(a);
        if t == 0.0 {
            if self.p > 2.0 {
                return Ok([[0.0; 2]; 2]);
            }
            if self.p == 2.0 {
                return Ok([[1.0, 0.0], [0.0, 1.0]]);
            }
            return Err(Error::Unsupported { density: "p-Laplace", operation: "Hessian at the origin" });
        }
        let w1 = t.powf(self.p - 1.0);
        let w2 = (self.p - 1.0) * t.powf(self.p - 2.0);
        Ok(radial_hessian(a, t, w1, w2))
    }

    fn conjugate(&self, b: Vector) -> f64 {
        let q = self.dual_exponent();
        norm(b).powf(q) / q
    }
}

impl OptimalDesign {
    /// Validated constructor; requires `0 < t1 < t2`, `0 < mu1 < mu2` and
    /// `t1 mu2 = mu1 t2`.
    pub fn new(mu1: f64, mu2: f64, t1: f64, t2: f64) -> Result<Self> {
        if !(0.0 < t1 && t1 < t2 && 0.0 < mu1 && mu1 < mu2) {
            return Err(Error::Config(format!(
                "optimal design requires 0 < t1 < t2 and 0 < mu1 < mu2 (got t1={t1}, t2={t2}, mu1={mu1}, mu2={mu2})"
            )));
        }
        let mismatch = (t1 * mu2 - mu1 * t2).abs();
        if mismatch > 1e-12 * (t1 * mu2).abs().max(1.0) {
            return Err(Error::Config(format!("optimal design requires t1 mu2 = mu1 t2 (mismatch {mismatch:e})")));
        }
        Ok(OptimalDesign { mu1, mu2, t1, t2 })
    }

    /// Parameters with `t1 = sqrt(2 lambda mu1 / mu2)` and `t2 = mu2 t1 / mu1`.
    pub fn from_lambda(mu1: f64, mu2: f64, lambda: f64) -> Result<Self> {
        let t1 = (2.0 * lambda * mu1 / mu2).sqrt();
        Self::new(mu1, mu2, t1, mu2 * t1 / mu1)
    }

    /// Radial profile `w(t)`.
    pub fn radial(&self, t: f64) -> f64 {
        let OptimalDesign { mu1, mu2, t1, t2 } = *self;
        if t <= t1 + KINK_TOL {
            mu2 * t * t / 2.0
        } else if t <= t2 + KINK_TOL {
            t1 * mu2 * (t - t1 / 2.0)
        } else {
            mu1 * t * t / 2.0 + t1 * mu2 * (t2 / 2.0 - t1 / 2.0)
        }
    }

    fn radial_derivatives(&self, t: f64) -> (f64, f64) {
        let OptimalDesign { mu1, mu2, t1, t2 } = *self;
        if t <= t1 + KINK_TOL {
            (mu2 * t, mu2)
        } else if t <= t2 + KINK_TOL {
            (t1 * mu2, 0.0)
        } else {
            (mu1 * t, mu1)
        }
    }

    /// Legendre transform of the radial profile. Slopes in `[0, mu2 t1]`
    /// come from the inner branch, slopes above `mu1 t2 = mu2 t1` from the
    /// outer one; the middle branch only contributes the single slope.
    pub fn radial_conjugate(&self, s: f64) -> f64 {
        let OptimalDesign { mu1, mu2, t1, t2 } = *self;
        if s <= mu2 * t1 {
            s * s / (2.0 * mu2)
        } else {
            s * s / (2.0 * mu1) - t1 * mu2 * (t2 / 2.0 - t1 / 2.0)
        }
    }

    fn value(&self, a: Vector) -> f64 {
        self.radial(norm(a))
    }

    fn gradient(&self, a: Vector) -> Vector {
        let t = norm(a);
        if t == 0.0 {
            return [0.0; 2];
        }
        scale(a, self.radial_derivatives(t).0 / t)
    }

    fn hessian(&self, a: Vector) -> Matrix {
        let t = norm(a);
        if t == 0.0 {
            return [[self.mu2, 0.0], [0.0, self.mu2]];
        }
        let (w1, w2) = self.radial_derivatives(t);
        radial_hessian(a, t, w1, w2)
    }

    fn conjugate(&self, b: Vector) -> f64 {
        self.radial_conjugate(norm(b))
    }
}

impl Bingham {
    pub fn is_regularized(&self) -> bool {
        self.epsilon > 0.0
    }

    fn radial(&self, t: f64) -> f64 {
        self.mu * t * t / 2.0 + self.g * t.hypot(self.epsilon)
    }

    fn value(&self, a: Vector) -> f64 {
        self.radial(norm(a))
    }

    fn gradient(&self, a: Vector) -> Result<Vector> {
        let t = norm(a);
        if t == 0.0 && !self.is_regularized() {
            return Err(Error::Unsupported { density: "Bingham", operation: "gradient at the origin" });
        }
        let rho = t.hypot(self.epsilon);
        if rho == 0.0 {
            return Ok([0.0; 2]);
        }
        Ok(scale(a, self.mu + self.g / rho))
    }

    fn hessian(&self, a: Vector) -> Result<Matrix> {
        let t = norm(a);
        if t == 0.0 && !self.is_regularized() {
            return Err(Error::Unsupported { density: "Bingham", operation: "Hessian at the origin" });
        }
        let rho = t.hypot(self.epsilon);
        let c = self.mu + self.g / rho;
        let d = self.g / (rho * rho * rho);
        Ok([[c - d * a[0] * a[0], -d * a[0] * a[1]], [-d * a[1] * a[0], c - d * a[1] * a[1]]])
    }

    /// Legendre transform of the radial profile. Closed form for `eps = 0`;
    /// otherwise the maximizer of `s t - w(t)` is the unique root of
    /// `mu t + g t / sqrt(t^2 + eps^2) = s`, found by safeguarded Newton.
    pub fn radial_conjugate(&self, s: f64) -> f64 {
        let Bingham { mu, g, epsilon } = *self;
        if !self.is_regularized() {
            return if s <= g { 0.0 } else { (s - g) * (s - g) / (2.0 * mu) };
        }
        if s <= 0.0 {
            return -g * epsilon;
        }
        let (mut lo, mut hi) = (0.0, s / mu);
        let mut t = ((s - g) / mu).clamp(lo, hi);
        for _ in 0..200 {
            let rho = t.hypot(epsilon);
            let phi = mu * t + g * t / rho - s;
            if phi > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            let dphi = mu + g * epsilon * epsilon / (rho * rho * rho);
            let mut next = t - phi / dphi;
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            if (next - t).abs() <= 4.0 * f64::EPSILON * t.max(f64::MIN_POSITIVE) || hi - lo <= 2.0 * f64::EPSILON * hi {
                t = next;
                break;
            }
            t = next;
        }
        s * t - self.radial(t)
    }

    fn conjugate(&self, b: Vector) -> f64 {
        self.radial_conjugate(norm(b))
    }
}

impl EnergyDensity {
    pub fn p_laplace(p: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(Error::Config(format!("p-Laplace requires 1 < p < infinity (got {p})")));
        }
        Ok(EnergyDensity::PLaplace(PLaplace { p }))
    }

    pub fn optimal_design(mu1: f64, mu2: f64, t1: f64, t2: f64) -> Result<Self> {
        OptimalDesign::new(mu1, mu2, t1, t2).map(EnergyDensity::OptimalDesign)
    }

    pub fn bingham(mu: f64, g: f64) -> Result<Self> {
        Self::bingham_regularized(mu, g, 0.0)
    }

    pub fn bingham_regularized(mu: f64, g: f64, epsilon: f64) -> Result<Self> {
        if !(mu > 0.0 && g > 0.0 && epsilon >= 0.0) {
            return Err(Error::Config(format!("Bingham requires mu, g > 0 and eps >= 0 (got {mu}, {g}, {epsilon})")));
        }
        Ok(EnergyDensity::Bingham(Bingham { mu, g, epsilon }))
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnergyDensity::PLaplace(_) => "p-Laplace",
            EnergyDensity::OptimalDesign(_) => "optimal design",
            EnergyDensity::Bingham(b) if b.is_regularized() => "regularized Bingham",
            EnergyDensity::Bingham(_) => "Bingham",
        }
    }

    /// Growth exponent `p` of `W`.
    pub fn growth(&self) -> f64 {
        match self {
            EnergyDensity::PLaplace(d) => d.p,
            EnergyDensity::OptimalDesign(_) | EnergyDensity::Bingham(_) => 2.0,
        }
    }

    /// Whether `gradient` and `hessian` are available everywhere.
    pub fn is_smooth(&self) -> bool {
        match self {
            EnergyDensity::Bingham(b) => b.is_regularized(),
            EnergyDensity::PLaplace(d) => d.p >= 2.0,
            EnergyDensity::OptimalDesign(_) => true,
        }
    }

    /// Radii where the Hessian jumps.
    pub fn kinks(&self) -> Vec<f64> {
        match self {
            EnergyDensity::OptimalDesign(d) => vec![d.t1, d.t2],
            EnergyDensity::Bingham(b) if !b.is_regularized() => vec![0.0],
            EnergyDensity::PLaplace(d) if d.p < 2.0 => vec![0.0],
            _ => Vec::new(),
        }
    }

    /// The same density with the regularization removed (identity for
    /// densities without one).
    pub fn unregularized(&self) -> Self {
        match *self {
            EnergyDensity::Bingham(b) => EnergyDensity::Bingham(Bingham { epsilon: 0.0, ..b }),
            other => other,
        }
    }

    pub fn value(&self, a: Vector) -> f64 {
        match self {
            EnergyDensity::PLaplace(d) => d.value(a),
            EnergyDensity::OptimalDesign(d) => d.value(a),
            EnergyDensity::Bingham(d) => d.value(a),
        }
    }

    pub fn gradient(&self, a: Vector) -> Result<Vector> {
        match self {
            EnergyDensity::PLaplace(d) => Ok(d.gradient(a)),
            EnergyDensity::OptimalDesign(d) => Ok(d.gradient(a)),
            EnergyDensity::Bingham(d) => d.gradient(a),
        }
    }

    pub fn hessian(&self, a: Vector) -> Result<Matrix> {
        match self {
            EnergyDensity::PLaplace(d) => d.hessian(a),
            EnergyDensity::OptimalDesign(d) => Ok(d.hessian(a)),
            EnergyDensity::Bingham(d) => d.hessian(a),
        }
    }

    pub fn conjugate(&self, b: Vector) -> f64 {
        match self {
            EnergyDensity::PLaplace(d) => d.conjugate(b),
            EnergyDensity::OptimalDesign(d) => d.conjugate(b),
            EnergyDensity::Bingham(d) => d.conjugate(b),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn odp() -> EnergyDensity {
        EnergyDensity::OptimalDesign(OptimalDesign::from_lambda(1.0, 2.0, 0.0145).unwrap())
    }

    fn all_densities() -> Vec<EnergyDensity> {
        vec![
            EnergyDensity::p_laplace(4.0).unwrap(),
            EnergyDensity::p_laplace(2.0).unwrap(),
            EnergyDensity::p_laplace(3.0).unwrap(),
            odp(),
            EnergyDensity::bingham(1.0, 0.2).unwrap(),
            EnergyDensity::bingham_regularized(1.0, 0.2, 1e-3).unwrap(),
            EnergyDensity::bingham_regularized(1.0, 0.2, 1e-5).unwrap(),
        ]
    }

    fn random_vector(rng: &mut ChaCha8Rng, radius: f64) -> Vector {
        let r = radius * rng.random::<f64>();
        let phi = std::f64::consts::TAU * rng.random::<f64>();
        [r * phi.cos(), r * phi.sin()]
    }

    fn near_kink(d: &EnergyDensity, a: Vector, margin: f64) -> bool {
        d.kinks().iter().any(|&k| (norm(a) - k).abs() < margin)
    }

    #[test]
    fn p_laplace_values() {
        let d = EnergyDensity::p_laplace(4.0).unwrap();
        assert!((d.value([1.0, 0.0]) - 0.25).abs() < 1e-15);
        assert_eq!(d.gradient([1.0, 0.0]).unwrap(), [1.0, 0.0]);
        assert!((d.conjugate([1.0, 0.0]) - 0.75).abs() < 1e-15);
        assert_eq!(d.value([0.0, 0.0]), 0.0);
        assert_eq!(d.gradient([0.0, 0.0]).unwrap(), [0.0, 0.0]);
        assert!(EnergyDensity::p_laplace(1.0).is_err());
    }

    #[test]
    fn p4_conjugate_matches_legendre_transform() {
        // sup_t (t - t^4/4) is attained at t = 1.
        let brute = (0..=200_000)
            .map(|i| {
                let t = 2.0 * i as f64 / 200_000.0;
                t - t.powi(4) / 4.0
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((brute - 0.75).abs() < 1e-9);
    }

    #[test]
    fn optimal_design_parameters() {
        let OptimalDesign { mu1, mu2, t1, t2 } = OptimalDesign::from_lambda(1.0, 2.0, 0.0145).unwrap();
        assert!((t2 - 2.0 * t1).abs() < 1e-15);
        assert!((t1 - (0.0145f64).sqrt()).abs() < 1e-15);
        assert_eq!((mu1, mu2), (1.0, 2.0));
        assert!(OptimalDesign::new(1.0, 2.0, 0.1, 0.3).is_err());
        assert!(OptimalDesign::new(2.0, 1.0, 0.1, 0.05).is_err());
    }

    #[test]
    fn optimal_design_is_c1_at_breakpoints() {
        let d = OptimalDesign::from_lambda(1.0, 2.0, 0.0145).unwrap();
        let t1 = d.t1;
        let inner = d.mu2 * t1 * t1 / 2.0;
        let middle = t1 * d.mu2 * (t1 - t1 / 2.0);
        assert!((inner - middle).abs() < 1e-15);
        assert!((d.radial(t1) - inner).abs() < 1e-15);
        let t2 = d.t2;
        let outer = d.mu1 * t2 * t2 / 2.0 + t1 * d.mu2 * (t2 / 2.0 - t1 / 2.0);
        assert!((t1 * d.mu2 * (t2 - t1 / 2.0) - outer).abs() < 1e-15);
    }

    #[test]
    fn optimal_design_conjugate_matches_brute_force() {
        let d = OptimalDesign::from_lambda(1.0, 2.0, 0.0145).unwrap();
        let n = 1_000_000;
        let brute = |s: f64| {
            (0..=n)
                .map(|i| {
                    let t = 10.0 * i as f64 / n as f64;
                    s * t - d.radial(t)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        };
        for s in [d.mu2 * d.t1, 0.1, 0.5, 1.3, 3.0] {
            assert!((d.radial_conjugate(s) - brute(s)).abs() < 1e-7, "s = {s}");
        }
    }

    #[test]
    fn bingham_values() {
        let d = EnergyDensity::bingham(1.0, 0.2).unwrap();
        assert_eq!(d.conjugate([0.1, 0.0]), 0.0);
        assert!((d.conjugate([1.2, 0.0]) - 0.5).abs() < 1e-15);
        assert!(matches!(d.gradient([0.0, 0.0]), Err(Error::Unsupported { .. })));
        let r = EnergyDensity::bingham_regularized(1.0, 0.2, 1e-5).unwrap();
        assert!((r.value([0.0, 0.0]) - 0.2e-5).abs() < 1e-20);
        assert_eq!(r.gradient([0.0, 0.0]).unwrap(), [0.0, 0.0]);
    }

    #[test]
    fn regularized_bingham_conjugate_matches_brute_force() {
        let d = Bingham { mu: 1.0, g: 0.2, epsilon: 1e-2 };
        let n = 1_000_000;
        for s in [0.0, 0.05, 0.2, 0.7, 2.0] {
            let brute = (0..=n)
                .map(|i| {
                    let t = 3.0 * i as f64 / n as f64;
                    s * t - d.radial(t)
                })
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((d.radial_conjugate(s) - brute).abs() < 1e-9, "s = {s}");
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = 1e-6;
        for d in all_densities() {
            let mut checked = 0;
            while checked < 100 {
                let a = random_vector(&mut rng, 2.0);
                if near_kink(&d, a, 1e-3) || norm(a) < 1e-3 {
                    continue;
                }
                checked += 1;
                let g = d.gradient(a).unwrap();
                let fd = [
                    (d.value([a[0] + h, a[1]]) - d.value([a[0] - h, a[1]])) / (2.0 * h),
                    (d.value([a[0], a[1] + h]) - d.value([a[0], a[1] - h])) / (2.0 * h),
                ];
                let err = norm([g[0] - fd[0], g[1] - fd[1]]);
                assert!(err <= 1e-6 * norm(g).max(1.0), "{}: {err}", d.name());

                let hess = d.hessian(a).unwrap();
                for j in 0..2 {
                    let mut ap = a;
                    let mut am = a;
                    ap[j] += h;
                    am[j] -= h;
                    let gp = d.gradient(ap).unwrap();
                    let gm = d.gradient(am).unwrap();
                    for i in 0..2 {
                        let fd = (gp[i] - gm[i]) / (2.0 * h);
                        assert!(
                            (hess[i][j] - fd).abs() <= 1e-4 * hess[i][j].abs().max(1.0),
                            "{}: hessian",
                            d.name()
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn fenchel_young_and_conjugacy() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in all_densities() {
            for _ in 0..10_000 {
                let a = random_vector(&mut rng, 10.0);
                let b = random_vector(&mut rng, 10.0);
                let gap = d.value(a) + d.conjugate(b) - (a[0] * b[0] + a[1] * b[1]);
                assert!(gap >= -1e-12 * (1.0 + d.value(a).abs()), "{}: {gap}", d.name());
            }
            for _ in 0..200 {
                let a = random_vector(&mut rng, 5.0);
                if norm(a) == 0.0 {
                    continue;
                }
                let s = d.gradient(a).unwrap();
                let lhs = d.value(a) + d.conjugate(s);
                let rhs = a[0] * s[0] + a[1] * s[1];
                assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()), "{}: {lhs} vs {rhs}", d.name());
            }
        }
    }

    #[test]
    fn convexity_along_segments() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for d in all_densities() {
            for _ in 0..1000 {
                let a = random_vector(&mut rng, 3.0);
                let b = random_vector(&mut rng, 3.0);
                let mid = [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0];
                assert!(d.value(mid) <= (d.value(a) + d.value(b)) / 2.0 + 1e-14);
            }
        }
    }

    #[test]
    fn radial_conjugates_are_rotation_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in all_densities() {
            for _ in 0..100 {
                let b = random_vector(&mut rng, 4.0);
                let phi: f64 = rng.random::<f64>() * std::f64::consts::TAU;
                let rot = [b[0] * phi.cos() - b[1] * phi.sin(), b[0] * phi.sin() + b[1] * phi.cos()];
                let (x, y) = (d.conjugate(b), d.conjugate(rot));
                assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
            }
        }
    }

    #[test]
    fn hessians_are_positive_semidefinite() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for d in all_densities() {
            for _ in 0..500 {
                let a = random_vector(&mut rng, 3.0);
                if norm(a) == 0.0 {
                    continue;
                }
                let h = d.hessian(a).unwrap();
                let tr = h[0][0] + h[1][1];
                let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
                assert!(tr >= -1e-12 && det >= -1e-12 * (1.0 + tr * tr));
            }
        }
    }

    #[test]
    fn kink_tie_break_uses_lower_branch() {
        let d = OptimalDesign::from_lambda(1.0, 2.0, 0.0145).unwrap();
        assert_eq!(d.radial_derivatives(d.t1 + 1e-13).1, d.mu2);
        assert_eq!(d.radial_derivatives(d.t2 + 1e-13).1, 0.0);
    }
}
