use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::objective::{Objective, Quartic};
use crate::operators::LinearOperator;

/// Default lower-bound shift for problems whose minimum value is zero.
pub const DEFAULT_SHIFT: f64 = 1e-5;

/// `Σ w_i θ_i²` with weights alternating `(1, 1/100)`.
#[derive(Debug, Clone)]
pub struct Quadratic {
    weights: Vec<f64>,
    shift: f64,
}

impl Quadratic {
    /// The 100-dimensional benchmark (50 pairs).
    pub fn benchmark() -> Self {
        Self::new(100).expect("100 is even")
    }

    pub fn new(n: usize) -> Result<Self> {
        if n == 0 || n % 2 != 0 {
            return Err(Error::InvalidParameter(format!(
                "quadratic dimension must be a positive even number, got {n}"
            )));
        }
        let weights = (0..n)
            .map(|i| if i % 2 == 0 { 1.0 } else { 0.01 })
            .collect();
        Ok(Self {
            weights,
            shift: DEFAULT_SHIFT,
        })
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Hessian diagonal, entries alternating `(2, 0.02)`.
    pub fn hessian_diagonal(&self) -> Vec<f64> {
        self.weights.iter().map(|w| 2.0 * w).collect()
    }

    pub fn hessian_operator(&self) -> LinearOperator {
        LinearOperator::diagonal(self.hessian_diagonal()).expect("weights are positive")
    }
}

impl Objective for Quadratic {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| w * t * t)
            .sum()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .zip(&self.weights)
            .map(|(t, w)| 2.0 * w * t)
            .collect()
    }

    fn shift(&self) -> f64 {
        self.shift
    }

    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        let mut c = [0.0; 5];
        for ((t, d), w) in theta.iter().zip(dir).zip(&self.weights) {
            c[0] += w * t * t;
            c[1] += 2.0 * w * t * d;
            c[2] += w * d * d;
        }
        Some(c)
    }
}

/// `Σ θ_i² + 10n - 10 Σ cos(2πθ_i)`.
#[derive(Debug, Clone)]
pub struct Rastrigin {
    n: usize,
    shift: f64,
}

impl Rastrigin {
    pub const DOMAIN: (f64, f64) = (-5.12, 5.12);

    pub fn new(n: usize) -> Self {
        Self {
            n,
            shift: DEFAULT_SHIFT,
        }
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }
}

impl Objective for Rastrigin {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .map(|t| t * t + 10.0 - 10.0 * (2.0 * PI * t).cos())
            .sum()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta
            .iter()
            .map(|t| 2.0 * t + 20.0 * PI * (2.0 * PI * t).sin())
            .collect()
    }

    fn shift(&self) -> f64 {
        self.shift
    }
}

/// Rosenbrock's valley. For `n == 2` this is `(a-x)² + b(y-x²)²`; otherwise
/// `Σ_i (a-θ_i)² + b Σ_i (θ_{i+1} - θ_i²)²`.
#[derive(Debug, Clone)]
pub struct Rosenbrock {
    n: usize,
    a: f64,
    b: f64,
    shift: f64,
}

impl Rosenbrock {
    pub fn new(n: usize, a: f64, b: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "rosenbrock dimension must be positive".into(),
            ));
        }
        if !(b >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "rosenbrock b must be >= 0, got {b}"
            )));
        }
        Ok(Self {
            n,
            a,
            b,
            shift: DEFAULT_SHIFT,
        })
    }

    pub fn standard(n: usize) -> Self {
        Self::new(n, 1.0, 100.0).expect("valid defaults")
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    /// Whether the first sum covers only `θ_1` (the 2-D form).
    fn two_dimensional(&self) -> bool {
        self.n == 2
    }

    fn data_terms(&self) -> usize {
        if self.two_dimensional() {
            1
        } else {
            self.n
        }
    }
}

impl Objective for Rosenbrock {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, theta: &[f64]) -> f64 {
        let mut f = 0.0;
        for t in &theta[..self.data_terms()] {
            f += (self.a - t).powi(2);
        }
        for w in theta.windows(2) {
            f += self.b * (w[1] - w[0] * w[0]).powi(2);
        }
        f
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.n];
        for (gi, t) in g.iter_mut().zip(theta).take(self.data_terms()) {
            *gi = -2.0 * (self.a - t);
        }
        for i in 0..self.n.saturating_sub(1) {
            let d = theta[i + 1] - theta[i] * theta[i];
            g[i + 1] += 2.0 * self.b * d;
            g[i] -= 4.0 * self.b * theta[i] * d;
        }
        g
    }

    fn shift(&self) -> f64 {
        self.shift
    }

    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        let mut c = [0.0; 5];
        for (t, d) in theta.iter().zip(dir).take(self.data_terms()) {
            // (a - t - αd)²
            let u = self.a - t;
            c[0] += u * u;
            c[1] -= 2.0 * u * d;
            c[2] += d * d;
        }
        for i in 0..self.n.saturating_sub(1) {
            // (u + vα - wα²)²
            let u = theta[i + 1] - theta[i] * theta[i];
            let v = dir[i + 1] - 2.0 * theta[i] * dir[i];
            let w = dir[i] * dir[i];
            c[0] += self.b * u * u;
            c[1] += self.b * 2.0 * u * v;
            c[2] += self.b * (v * v - 2.0 * u * w);
            c[3] -= self.b * 2.0 * v * w;
            c[4] += self.b * w * w;
        }
        Some(c)
    }
}

/// `Σ_i p(θ_i - center)` for a polynomial `p` of degree at most four.
///
/// Covers the scalar test functions (`θ²`, `θ⁴`, `½θ²`, `θ² + 0.1θ⁴`) in any
/// dimension.
#[derive(Debug, Clone)]
pub struct SeparablePolynomial {
    coeffs: [f64; 5],
    center: f64,
    dim: usize,
    shift: f64,
}

impl SeparablePolynomial {
    pub fn new(coeffs: [f64; 5], dim: usize) -> Self {
        Self {
            coeffs,
            center: 0.0,
            dim,
            shift: 1.0,
        }
    }

    /// `θ²` in one dimension.
    pub fn square() -> Self {
        Self::new([0.0, 0.0, 1.0, 0.0, 0.0], 1)
    }

    pub fn with_center(mut self, center: f64) -> Self {
        self.center = center;
        self
    }

    pub fn with_dim(mut self, dim: usize) -> Self {
        self.dim = dim;
        self
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    fn p(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    fn dp(&self, x: f64) -> f64 {
        let c = &self.coeffs;
        ((4.0 * c[4] * x + 3.0 * c[3]) * x + 2.0 * c[2]) * x + c[1]
    }
}

impl Objective for SeparablePolynomial {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, theta: &[f64]) -> f64 {
        theta.iter().map(|t| self.p(t - self.center)).sum()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| self.dp(t - self.center)).collect()
    }

    fn shift(&self) -> f64 {
        self.shift
    }

    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        // p(x + αd) = Σ_k c_k Σ_j binom(k, j) x^{k-j} d^j α^j
        const BINOM: [[f64; 5]; 5] = [
            [1.0, 0.0, 0.0, 0.0, 0.0],
            [1.0, 1.0, 0.0, 0.0, 0.0],
            [1.0, 2.0, 1.0, 0.0, 0.0],
            [1.0, 3.0, 3.0, 1.0, 0.0],
            [1.0, 4.0, 6.0, 4.0, 1.0],
        ];
        let mut out = [0.0; 5];
        for (t, d) in theta.iter().zip(dir) {
            let x = t - self.center;
            for (k, ck) in self.coeffs.iter().enumerate() {
                if *ck == 0.0 {
                    continue;
                }
                for j in 0..=k {
                    out[j] += ck * BINOM[k][j] * x.powi((k - j) as i32) * d.powi(j as i32);
                }
            }
        }
        Some(out)
    }
}

/// `½‖Aθ - b‖²` for a dense matrix `A`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    a: DMatrix<f64>,
    b: DVector<f64>,
    shift: f64,
}

impl LeastSquares {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        Ok(Self {
            a,
            b,
            shift: DEFAULT_SHIFT,
        })
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    fn residual(&self, theta: &[f64]) -> DVector<f64> {
        &self.a * DVector::from_column_slice(theta) - &self.b
    }
}

impl Objective for LeastSquares {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        0.5 * self.residual(theta).norm_squared()
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let r = self.residual(theta);
        (self.a.transpose() * r).as_slice().to_vec()
    }

    fn shift(&self) -> f64 {
        self.shift
    }

    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        let r = self.residual(theta);
        let ad = &self.a * DVector::from_column_slice(dir);
        Some([
            0.5 * r.norm_squared(),
            r.dot(&ad),
            0.5 * ad.norm_squared(),
            0.0,
            0.0,
        ])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{directional_quartic, eval, grad};

    #[test]
    fn rastrigin_origin() {
        let r = Rastrigin::new(5);
        assert_eq!(eval(&r, &[0.0; 5]).unwrap(), 0.0);
        assert!(grad(&r, &[0.0; 5]).unwrap().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn rastrigin_ones_equals_dimension() {
        for n in [2, 10, 100] {
            let r = Rastrigin::new(n);
            let f = eval(&r, &vec![1.0; n]).unwrap();
            assert!((f - n as f64).abs() < 1e-9 * n as f64, "n={n} f={f}");
        }
    }

    #[test]
    fn rosenbrock_2d_values() {
        let r = Rosenbrock::standard(2);
        assert_eq!(eval(&r, &[1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(grad(&r, &[0.0, 0.0]).unwrap(), vec![-2.0, 0.0]);
    }

    #[test]
    fn rosenbrock_nd_at_zero_and_minimum() {
        for n in [3, 10, 100] {
            let r = Rosenbrock::standard(n);
            assert_eq!(eval(&r, &vec![0.0; n]).unwrap(), n as f64);
            assert!(grad(&r, &vec![1.0; n]).unwrap().iter().all(|g| *g == 0.0));
        }
    }

    #[test]
    fn rosenbrock_ray_example() {
        let r = Rosenbrock::standard(2);
        let c = directional_quartic(&r, &[0.0, 0.0], &[1.0, 0.0]).unwrap();
        assert_eq!(c, [1.0, -2.0, 1.0, 0.0, 100.0]);
    }

    #[test]
    fn square_ray_example() {
        let p = SeparablePolynomial::square();
        assert_eq!(
            directional_quartic(&p, &[1.0], &[-1.0]).unwrap(),
            [1.0, -2.0, 1.0, 0.0, 0.0]
        );
        assert_eq!(grad(&p, &[1.0]).unwrap(), vec![2.0]);
    }

    #[test]
    fn zero_direction_is_constant_ray() {
        let r = Rosenbrock::standard(4);
        let theta = [0.3, -1.0, 2.0, 0.5];
        let c = directional_quartic(&r, &theta, &[0.0; 4]).unwrap();
        assert_eq!(c, [eval(&r, &theta).unwrap(), 0.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn quadratic_at_ones() {
        let q = Quadratic::benchmark();
        assert!((eval(&q, &[1.0; 100]).unwrap() - 50.5).abs() < 1e-12);
    }

    #[test]
    fn quadratic_rejects_odd_dimension() {
        assert!(Quadratic::new(3).is_err());
    }
}
