//! Phase retrieval from coded diffraction patterns:
//! `f(z) = ½ Σ_{i,j} (|F(M_i ∘ z)_j|² - b_{ij})²` over `z ∈ C^N`.
//!
//! `z` is stored as an interleaved real vector `(re_0, im_0, re_1, ...)` so the
//! real inner product of `C^N` is the ordinary dot product and the real
//! gradient equals `∂f/∂a + i ∂f/∂b`.

use std::f64::consts::FRAC_1_SQRT_2;
use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::{Objective, Quartic};

/// Complex vector with the real inner product `Re Σ conj(a_j) b_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(pub Vec<Complex64>);

impl ComplexVector {
    pub fn from_interleaved(v: &[f64]) -> Self {
        Self(
            v.chunks_exact(2)
                .map(|p| Complex64::new(p[0], p[1]))
                .collect(),
        )
    }

    pub fn to_interleaved(&self) -> Vec<f64> {
        self.0.iter().flat_map(|c| [c.re, c.im]).collect()
    }

    pub fn real_inner(&self, other: &Self) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a.conj() * b).re)
            .sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Multiply every entry by `e^{iφ}`.
    pub fn rotate(&self, phi: f64) -> Self {
        let w = Complex64::from_polar(1.0, phi);
        Self(self.0.iter().map(|z| z * w).collect())
    }
}

/// Unitary DFT over a 1-D or 2-D (row-major) grid.
#[derive(Clone)]
struct UnitaryDft {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Option<Arc<dyn Fft<f64>>>,
    col_inv: Option<Arc<dyn Fft<f64>>>,
    scale: f64,
}

impl UnitaryDft {
    fn new(shape: &[usize]) -> Self {
        let (rows, cols) = match shape {
            [n] => (1, *n),
            [r, c] => (*r, *c),
            _ => unreachable!("shape validated by caller"),
        };
        let mut planner = FftPlanner::new();
        let (col_fwd, col_inv) = if rows > 1 {
            (
                Some(planner.plan_fft_forward(rows)),
                Some(planner.plan_fft_inverse(rows)),
            )
        } else {
            (None, None)
        };
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd,
            col_inv,
            scale: 1.0 / ((rows * cols) as f64).sqrt(),
        }
    }

    fn run(&self, data: &mut [Complex64], inverse: bool) {
        let (row, col) = if inverse {
            (&self.row_inv, &self.col_inv)
        } else {
            (&self.row_fwd, &self.col_fwd)
        };
        row.process(data);
        if let Some(col) = col {
            let mut column = vec![Complex64::new(0.0, 0.0); self.rows];
            for c in 0..self.cols {
                for r in 0..self.rows {
                    column[r] = data[r * self.cols + c];
                }
                col.process(&mut column);
                for r in 0..self.rows {
                    data[r * self.cols + c] = column[r];
                }
            }
        }
        for x in data.iter_mut() {
            *x *= self.scale;
        }
    }

    fn forward(&self, data: &mut [Complex64]) {
        self.run(data, false)
    }

    fn inverse(&self, data: &mut [Complex64]) {
        self.run(data, true)
    }
}

/// How the hidden signal is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum TruthKind {
    /// Real entries uniform in `[0, 1)`, like a grayscale image.
    #[default]
    RealUniform,
    /// Standard complex Gaussian entries.
    ComplexGaussian,
}

fn complex_gaussian(rng: &mut ChaCha8Rng) -> Complex64 {
    let x: f64 = rng.sample(StandardNormal);
    let y: f64 = rng.sample(StandardNormal);
    Complex64::new(x, y) * FRAC_1_SQRT_2
}

pub struct PhaseRetrieval {
    shape: Vec<usize>,
    masks: Vec<Vec<Complex64>>,
    truth: Vec<Complex64>,
    measurements: Vec<Vec<f64>>,
    dft: UnitaryDft,
    shift: f64,
}

impl std::fmt::Debug for PhaseRetrieval {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PhaseRetrieval")
            .field("shape", &self.shape)
            .field("masks", &self.masks.len())
            .field("shift", &self.shift)
            .finish()
    }
}

impl PhaseRetrieval {
    /// Seeded instance: `m` masks with i.i.d. entries `(x + iy)/√2`, then the
    /// truth, then measurements `b_i = |F(M_i ∘ z*)|²`.
    pub fn generate(shape: &[usize], m: usize, truth: TruthKind, seed: u64) -> Result<Self> {
        let n = validate_shape(shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let masks = (0..m)
            .map(|_| (0..n).map(|_| complex_gaussian(&mut rng)).collect())
            .collect();
        let truth = match truth {
            TruthKind::RealUniform => (0..n)
                .map(|_| Complex64::new(rng.random::<f64>(), 0.0))
                .collect(),
            TruthKind::ComplexGaussian => (0..n).map(|_| complex_gaussian(&mut rng)).collect(),
        };
        Self::from_parts(shape, masks, truth)
    }

    pub fn from_parts(
        shape: &[usize],
        masks: Vec<Vec<Complex64>>,
        truth: Vec<Complex64>,
    ) -> Result<Self> {
        let n = validate_shape(shape)?;
        if masks.is_empty() {
            return Err(Error::InvalidParameter(
                "phase retrieval needs at least one mask".into(),
            ));
        }
        for mk in &masks {
            if mk.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: mk.len(),
                });
            }
        }
        if truth.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: truth.len(),
            });
        }
        let mut p = Self {
            shape: shape.to_vec(),
            masks,
            truth,
            measurements: Vec::new(),
            dft: UnitaryDft::new(shape),
            shift: 1.0,
        };
        p.measurements = p.measure(&p.truth.clone());
        Ok(p)
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    pub fn signal_len(&self) -> usize {
        self.truth.len()
    }

    pub fn mask_count(&self) -> usize {
        self.masks.len()
    }

    pub fn truth(&self) -> ComplexVector {
        ComplexVector(self.truth.clone())
    }

    pub fn measurements(&self) -> &[Vec<f64>] {
        &self.measurements
    }

    /// Random complex Gaussian start scaled to the RMS magnitude of the truth.
    pub fn random_init(&self, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rms =
            (self.truth.iter().map(|z| z.norm_sqr()).sum::<f64>() / self.truth.len() as f64).sqrt();
        let z: Vec<Complex64> = (0..self.truth.len())
            .map(|_| complex_gaussian(&mut rng) * rms)
            .collect();
        ComplexVector(z).to_interleaved()
    }

    fn project(&self, mask: &[Complex64], z: &[Complex64]) -> Vec<Complex64> {
        let mut y: Vec<Complex64> = mask.iter().zip(z).map(|(m, z)| m * z).collect();
        self.dft.forward(&mut y);
        y
    }

    /// `|F(M_i ∘ z)|²` for every mask.
    pub fn measure(&self, z: &[Complex64]) -> Vec<Vec<f64>> {
        self.masks
            .iter()
            .map(|mk| self.project(mk, z).iter().map(|y| y.norm_sqr()).collect())
            .collect()
    }

    pub fn eval_complex(&self, z: &ComplexVector) -> f64 {
        let mut f = 0.0;
        for (mk, b) in self.masks.iter().zip(&self.measurements) {
            for (y, bj) in self.project(mk, &z.0).iter().zip(b) {
                let e = y.norm_sqr() - bj;
                f += e * e;
            }
        }
        0.5 * f
    }

    /// `2 Σ_i conj(M_i) ∘ F*((|y_i|² - b_i) ∘ y_i)`
    pub fn grad_complex(&self, z: &ComplexVector) -> ComplexVector {
        let mut g = vec![Complex64::new(0.0, 0.0); z.len()];
        for (mk, b) in self.masks.iter().zip(&self.measurements) {
            let mut y = self.project(mk, &z.0);
            for (yj, bj) in y.iter_mut().zip(b) {
                *yj *= yj.norm_sqr() - bj;
            }
            self.dft.inverse(&mut y);
            for ((gj, m), w) in g.iter_mut().zip(mk).zip(&y) {
                *gj += 2.0 * m.conj() * w;
            }
        }
        ComplexVector(g)
    }
}

fn validate_shape(shape: &[usize]) -> Result<usize> {
    match shape {
        [n] if *n > 0 => Ok(*n),
        [r, c] if *r > 0 && *c > 0 => Ok(r * c),
        _ => Err(Error::InvalidParameter(format!(
            "phase retrieval shape must be [n] or [rows, cols], got {shape:?}"
        ))),
    }
}

impl Objective for PhaseRetrieval {
    fn dim(&self) -> usize {
        2 * self.truth.len()
    }

    fn value(&self, theta: &[f64]) -> f64 {
        self.eval_complex(&ComplexVector::from_interleaved(theta))
    }

    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.grad_complex(&ComplexVector::from_interleaved(theta))
            .to_interleaved()
    }

    fn shift(&self) -> f64 {
        self.shift
    }

    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        let z = ComplexVector::from_interleaved(theta);
        let d = ComplexVector::from_interleaved(dir);
        let mut c = [0.0; 5];
        for (mk, b) in self.masks.iter().zip(&self.measurements) {
            let y = self.project(mk, &z.0);
            let e = self.project(mk, &d.0);
            for ((yj, ej), bj) in y.iter().zip(&e).zip(b) {
                // |y + αe|² - b = p0 + p1 α + p2 α²
                let p0 = yj.norm_sqr() - bj;
                let p1 = 2.0 * (yj.conj() * ej).re;
                let p2 = ej.norm_sqr();
                c[0] += 0.5 * p0 * p0;
                c[1] += p0 * p1;
                c[2] += 0.5 * p1 * p1 + p0 * p2;
                c[3] += p1 * p2;
                c[4] += 0.5 * p2 * p2;
            }
        }
        Some(c)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> PhaseRetrieval {
        let one = Complex64::new(1.0, 0.0);
        let zero = Complex64::new(0.0, 0.0);
        PhaseRetrieval::from_parts(&[2], vec![vec![one, one]], vec![one, zero]).unwrap()
    }

    #[test]
    fn two_point_measurements() {
        // unitary 2-point DFT of (1, 0) is (1, 1)/√2
        let p = tiny();
        let b = &p.measurements()[0];
        assert!((b[0] - 0.5).abs() < 1e-15 && (b[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn two_point_value_at_swapped_signal() {
        // F(0, 1) = (1, -1)/√2 has the same moduli as F(1, 0): f = 0
        let p = tiny();
        assert!(p.value(&[0.0, 0.0, 1.0, 0.0]).abs() < 1e-15);
        // F(0, i) likewise; F(1, 1) = (√2, 0) gives ½((2 - ½)² + (0 - ½)²) = 1.25
        assert!(p.value(&[0.0, 0.0, 0.0, 1.0]).abs() < 1e-15);
        assert!((p.value(&[1.0, 0.0, 1.0, 0.0]) - 1.25).abs() < 1e-14);
    }

    #[test]
    fn truth_is_global_minimum() {
        let p = PhaseRetrieval::generate(&[16], 3, TruthKind::ComplexGaussian, 9).unwrap();
        let z = p.truth();
        assert!(p.eval_complex(&z) < 1e-24);
        assert!(p.grad_complex(&z).0.iter().all(|g| g.norm() < 1e-12));
        assert!(p.eval_complex(&z.rotate(std::f64::consts::FRAC_PI_3)) < 1e-24);
    }

    #[test]
    fn two_dimensional_dft_is_unitary() {
        let dft = UnitaryDft::new(&[4, 8]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x: Vec<Complex64> = (0..32).map(|_| complex_gaussian(&mut rng)).collect();
        let mut y = x.clone();
        dft.forward(&mut y);
        let nx: f64 = x.iter().map(|c| c.norm_sqr()).sum();
        let ny: f64 = y.iter().map(|c| c.norm_sqr()).sum();
        assert!((nx - ny).abs() < 1e-12 * nx);
        dft.inverse(&mut y);
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn rejects_bad_shape() {
        assert!(PhaseRetrieval::generate(&[2, 2, 2], 1, TruthKind::RealUniform, 0).is_err());
        assert!(PhaseRetrieval::generate(&[0], 1, TruthKind::RealUniform, 0).is_err());
    }
}
