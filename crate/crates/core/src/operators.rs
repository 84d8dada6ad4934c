//! Non-negative self-adjoint linear operators `L` used to precondition the
//! SAV steppers through `A = I + dt * L`.
//!
//! Every variant admits an exact shifted solve: the diagonal variants are
//! solved componentwise and the periodic Laplacian variants are diagonalised
//! by the discrete Fourier transform, where `-Δ` has the nonnegative symbol
//! `2 - 2 cos(2πj/n)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::linalg::all_finite;

/// Linear operator interface consumed by the steppers.
///
/// Implementations must be self-adjoint and positive semi-definite for the
/// energy identities to hold; `verify` checks both properties numerically.
pub trait Operator {
    fn dim(&self) -> usize;

    /// `L v`
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;

    /// Solve `(I + dt L) x = b`.
    fn solve_shifted(&self, dt: f64, b: &[f64]) -> Result<Vec<f64>>;

    /// `v + dt L v`
    fn apply_shift(&self, dt: f64, v: &[f64]) -> Result<Vec<f64>> {
        let lv = self.apply(v)?;
        Ok(v.iter().zip(&lv).map(|(x, y)| x + dt * y).collect())
    }

    /// True when `L = 0`, letting callers skip the solve.
    fn is_zero(&self) -> bool {
        false
    }
}

/// Operator kinds as they appear in experiment configs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorKind {
    Zero,
    ScaledIdentity,
    Diagonal,
    /// The diagonal of the objective's Hessian (quadratic problem only).
    HessianDiagonal,
    Laplacian,
    Composite,
}

#[derive(Clone, PartialEq)]
enum Variant {
    Zero,
    ScaledIdentity(f64),
    Diagonal(Vec<f64>),
    /// `-σΔ`
    PeriodicLaplacian(f64),
    /// `λI - σΔ`
    Composite {
        lambda: f64,
        sigma: f64,
    },
}

/// A concrete operator. Immutable after construction.
#[derive(Clone)]
pub struct LinearOperator {
    variant: Variant,
    dim: usize,
    spectral: Option<Spectral>,
}

/// Cached FFT plans and circulant eigenvalues for the Laplacian variants.
#[derive(Clone)]
struct Spectral {
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
    /// Eigenvalues of `L` in the Fourier basis.
    eigenvalues: Vec<f64>,
}

impl fmt::Debug for LinearOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("LinearOperator");
        match &self.variant {
            Variant::Zero => s.field("kind", &"zero"),
            Variant::ScaledIdentity(l) => s.field("kind", &"scaled_identity").field("lambda", l),
            Variant::Diagonal(d) => s.field("kind", &"diagonal").field("len", &d.len()),
            Variant::PeriodicLaplacian(sig) => s.field("kind", &"laplacian").field("sigma", sig),
            Variant::Composite { lambda, sigma } => s
                .field("kind", &"composite")
                .field("lambda", lambda)
                .field("sigma", sigma),
        };
        s.field("dim", &self.dim).finish()
    }
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be finite and nonnegative, got {v}"
        )));
    }
    Ok(())
}

fn check_positive_dim(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidParameter(
            "operator dimension must be positive".into(),
        ));
    }
    Ok(())
}

/// Symbol of `-Δ` (periodic, unit spacing) at frequency `j`.
pub fn laplacian_symbol(j: usize, n: usize) -> f64 {
    2.0 - 2.0 * (2.0 * PI * j as f64 / n as f64).cos()
}

impl LinearOperator {
    pub fn zero(dim: usize) -> Result<Self> {
        check_positive_dim(dim)?;
        Ok(Self {
            variant: Variant::Zero,
            dim,
            spectral: None,
        })
    }

    pub fn scaled_identity(lambda: f64, dim: usize) -> Result<Self> {
        check_positive_dim(dim)?;
        check_nonneg("lambda", lambda)?;
        Ok(Self {
            variant: Variant::ScaledIdentity(lambda),
            dim,
            spectral: None,
        })
    }

    /// Diagonal operator; zero entries are allowed.
    pub fn diagonal(entries: Vec<f64>) -> Result<Self> {
        check_positive_dim(entries.len())?;
        for &d in &entries {
            check_nonneg("diagonal entry", d)?;
        }
        let dim = entries.len();
        Ok(Self {
            variant: Variant::Diagonal(entries),
            dim,
            spectral: None,
        })
    }

    /// `-σΔ` with the 1-D periodic stencil.
    pub fn laplacian(sigma: f64, dim: usize) -> Result<Self> {
        check_positive_dim(dim)?;
        check_nonneg("sigma", sigma)?;
        let spectral = Spectral::new(dim, 0.0, sigma);
        Ok(Self {
            variant: Variant::PeriodicLaplacian(sigma),
            dim,
            spectral: Some(spectral),
        })
    }

    /// `λI - σΔ` with the 1-D periodic stencil.
    pub fn composite(lambda: f64, sigma: f64, dim: usize) -> Result<Self> {
        check_positive_dim(dim)?;
        check_nonneg("lambda", lambda)?;
        check_nonneg("sigma", sigma)?;
        let spectral = Spectral::new(dim, lambda, sigma);
        Ok(Self {
            variant: Variant::Composite { lambda, sigma },
            dim,
            spectral: Some(spectral),
        })
    }

    pub fn kind(&self) -> OperatorKind {
        match self.variant {
            Variant::Zero => OperatorKind::Zero,
            Variant::ScaledIdentity(_) => OperatorKind::ScaledIdentity,
            Variant::Diagonal(_) => OperatorKind::Diagonal,
            Variant::PeriodicLaplacian(_) => OperatorKind::Laplacian,
            Variant::Composite { .. } => OperatorKind::Composite,
        }
    }

    fn laplacian_parts(&self) -> Option<(f64, f64)> {
        match self.variant {
            Variant::PeriodicLaplacian(sigma) => Some((0.0, sigma)),
            Variant::Composite { lambda, sigma } => Some((lambda, sigma)),
            _ => None,
        }
    }
}

impl Spectral {
    fn new(n: usize, lambda: f64, sigma: f64) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let eigenvalues = (0..n)
            .map(|j| lambda + sigma * laplacian_symbol(j, n))
            .collect();
        Self {
            forward,
            inverse,
            eigenvalues,
        }
    }

    fn solve(&self, dt: f64, b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut buf: Vec<Complex64> = b.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        for (c, &ev) in buf.iter_mut().zip(&self.eigenvalues) {
            *c /= 1.0 + dt * ev;
        }
        self.inverse.process(&mut buf);
        let scale = 1.0 / n as f64;
        buf.iter().map(|c| c.re * scale).collect()
    }
}

/// `(-Δv)_i = 2v_i - v_{i-1} - v_{i+1}` with periodic wrap.
fn neg_laplacian(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            let prev = v[(i + n - 1) % n];
            let next = v[(i + 1) % n];
            2.0 * v[i] - prev - next
        })
        .collect()
}

impl Operator for LinearOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, v.len())?;
        Ok(match &self.variant {
            Variant::Zero => vec![0.0; v.len()],
            Variant::ScaledIdentity(l) => v.iter().map(|x| l * x).collect(),
            Variant::Diagonal(d) => v.iter().zip(d).map(|(x, di)| di * x).collect(),
            Variant::PeriodicLaplacian(_) | Variant::Composite { .. } => {
                let (lambda, sigma) = self.laplacian_parts().unwrap_or_default();
                neg_laplacian(v)
                    .into_iter()
                    .zip(v)
                    .map(|(lv, x)| lambda * x + sigma * lv)
                    .collect()
            }
        })
    }

    fn solve_shifted(&self, dt: f64, b: &[f64]) -> Result<Vec<f64>> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "dt must be positive, got {dt}"
            )));
        }
        check_dim(self.dim, b.len())?;
        if !all_finite(b) {
            return Err(Error::NonFiniteInput(
                "shifted solve right-hand side".into(),
            ));
        }
        Ok(match &self.variant {
            Variant::Zero => b.to_vec(),
            Variant::ScaledIdentity(l) => {
                let s = 1.0 + dt * l;
                b.iter().map(|x| x / s).collect()
            }
            Variant::Diagonal(d) => b.iter().zip(d).map(|(x, di)| x / (1.0 + dt * di)).collect(),
            Variant::PeriodicLaplacian(_) | Variant::Composite { .. } => self
                .spectral
                .as_ref()
                .expect("laplacian variants carry a spectral cache")
                .solve(dt, b),
        })
    }

    fn is_zero(&self) -> bool {
        matches!(self.variant, Variant::Zero)
    }
}
