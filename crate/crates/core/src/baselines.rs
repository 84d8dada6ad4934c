//! Reference optimizers: preconditioned GD, NAG, ADAM and exact steepest descent.

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, norm};
use crate::objective::{directional_quartic, grad, quartic_value, Objective, Quartic};
use crate::operators::Operator;

fn finite(theta: Vec<f64>) -> Result<Vec<f64>> {
    if all_finite(&theta) {
        Ok(theta)
    } else {
        Err(Error::Diverged("non-finite parameters".into()))
    }
}

/// `θ - δt (I + δt L)⁻¹ ∇f(θ)`.
pub fn gd_step<O, L>(theta: &[f64], obj: &O, op: &L, dt: f64) -> Result<Vec<f64>>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    let g = grad(obj, theta)?;
    let g_hat = op.solve_shifted(dt, &g)?;
    finite(axpy(theta, -dt, &g_hat))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NagState {
    pub theta: Vec<f64>,
    pub velocity: Vec<f64>,
    pub gamma: f64,
    pub lr: f64,
}

impl NagState {
    pub fn new(theta: Vec<f64>, lr: f64) -> Self {
        let velocity = vec![0.0; theta.len()];
        Self {
            theta,
            velocity,
            gamma: 0.9,
            lr,
        }
    }
}

/// Nesterov momentum, lookahead form:
/// `v ← γ v + lr ∇f(θ - γ v)`, `θ ← θ - v`.
pub fn nag_step<O: Objective + ?Sized>(s: &NagState, obj: &O) -> Result<NagState> {
    let lookahead = axpy(&s.theta, -s.gamma, &s.velocity);
    let g = grad(obj, &lookahead)?;
    let velocity: Vec<f64> = s
        .velocity
        .iter()
        .zip(&g)
        .map(|(v, gi)| s.gamma * v + s.lr * gi)
        .collect();
    let theta = finite(axpy(&s.theta, -1.0, &velocity))?;
    Ok(NagState {
        theta,
        velocity,
        gamma: s.gamma,
        lr: s.lr,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub theta: Vec<f64>,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub lr: f64,
    /// Number of steps taken.
    pub t: u64,
}

impl AdamState {
    pub fn new(theta: Vec<f64>, lr: f64) -> Self {
        let n = theta.len();
        Self {
            theta,
            m: vec![0.0; n],
            v: vec![0.0; n],
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            lr,
            t: 0,
        }
    }
}

/// Bias-corrected ADAM step.
pub fn adam_step<O: Objective + ?Sized>(s: &AdamState, obj: &O) -> Result<AdamState> {
    let g = grad(obj, &s.theta)?;
    let t = s.t + 1;
    let m: Vec<f64> =
        s.m.iter()
            .zip(&g)
            .map(|(m, g)| s.beta1 * m + (1.0 - s.beta1) * g)
            .collect();
    let v: Vec<f64> =
        s.v.iter()
            .zip(&g)
            .map(|(v, g)| s.beta2 * v + (1.0 - s.beta2) * g * g)
            .collect();
    let c1 = 1.0 - s.beta1.powf(t as f64);
    let c2 = 1.0 - s.beta2.powf(t as f64);
    let theta: Vec<f64> = s
        .theta
        .iter()
        .zip(m.iter().zip(&v))
        .map(|(th, (m, v))| th - s.lr * (m / c1) / ((v / c2).sqrt() + s.eps))
        .collect();
    Ok(AdamState {
        theta: finite(theta)?,
        m,
        v,
        t,
        ..s.clone()
    })
}

/// Real roots of `c0 + c1 x + c2 x² + c3 x³`.
fn real_roots_cubic(c0: f64, c1: f64, c2: f64, c3: f64) -> Vec<f64> {
    if c3 == 0.0 {
        if c2 == 0.0 {
            return if c1 == 0.0 { vec![] } else { vec![-c0 / c1] };
        }
        let disc = c1 * c1 - 4.0 * c2 * c0;
        if disc < 0.0 {
            return vec![];
        }
        let sq = disc.sqrt();
        let qq = -0.5 * (c1 + c1.signum() * sq);
        if qq == 0.0 {
            return vec![0.0];
        }
        return vec![qq / c2, c0 / qq];
    }
    let (a, b, c) = (c2 / c3, c1 / c3, c0 / c3);
    let p = b - a * a / 3.0;
    let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
    let shift = -a / 3.0;
    let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
    if p == 0.0 {
        vec![(-q).cbrt() + shift]
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        vec![(-q / 2.0 + sq).cbrt() + (-q / 2.0 - sq).cbrt() + shift]
    } else {
        let m = 2.0 * (-p / 3.0).sqrt();
        let arg = ((3.0 * q) / (2.0 * p) * (-3.0 / p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        (0..3)
            .map(|k| m * (phi - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() + shift)
            .collect()
    }
}

/// Newton refinement of a root of `φ'`.
fn polish(c: &Quartic, mut x: f64) -> f64 {
    let d1 = |x: f64| c[1] + x * (2.0 * c[2] + x * (3.0 * c[3] + x * 4.0 * c[4]));
    let d2 = |x: f64| 2.0 * c[2] + x * (6.0 * c[3] + x * 12.0 * c[4]);
    for _ in 0..50 {
        let (g, h) = (d1(x), d2(x));
        if g == 0.0 || h == 0.0 || !h.is_finite() {
            break;
        }
        let next = x - g / h;
        if !next.is_finite() || d1(next).abs() >= g.abs() {
            break;
        }
        x = next;
        if (g / h).abs() <= 1e-14 * (1.0 + x.abs()) {
            break;
        }
    }
    x
}

/// Global minimizer over `α ≥ 0` of the quartic `φ(α) = Σ c_j α^j`.
pub fn minimize_quartic_ray(c: &Quartic) -> Result<f64> {
    let unbounded =
        c[4] < 0.0 || (c[4] == 0.0 && (c[3] != 0.0 || c[2] < 0.0 || (c[2] == 0.0 && c[1] < 0.0)));
    if unbounded {
        return Err(Error::InvalidParameter(
            "ray objective is unbounded below".into(),
        ));
    }
    let mut best = (quartic_value(c, 0.0), 0.0);
    for root in real_roots_cubic(c[1], 2.0 * c[2], 3.0 * c[3], 4.0 * c[4]) {
        let x = polish(c, root);
        if x.is_finite() && x > 0.0 {
            let v = quartic_value(c, x);
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    Ok(best.1)
}

/// Steepest descent with the exact ray minimizer. Returns the new point and
/// the step `α*` along `-∇f`.
pub fn steepest_descent_step<O: Objective + ?Sized>(
    theta: &[f64],
    obj: &O,
) -> Result<(Vec<f64>, f64)> {
    let g = grad(obj, theta)?;
    if norm(&g) == 0.0 {
        return Ok((theta.to_vec(), 0.0));
    }
    let d: Vec<f64> = g.iter().map(|x| -x).collect();
    let c = directional_quartic(obj, theta, &d)?;
    let alpha = minimize_quartic_ray(&c)?;
    Ok((finite(axpy(theta, alpha, &d))?, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::LinearOperator;
    use crate::problems::SeparablePolynomial;

    #[test]
    fn gd_one_step() {
        let f = SeparablePolynomial::square().with_dim(1);
        let th = gd_step(&[1.0], &f, &LinearOperator::zero(1).unwrap(), 0.1).unwrap();
        assert!((th[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn nag_one_step() {
        let f = SeparablePolynomial::square().with_dim(1);
        let s = nag_step(&NagState::new(vec![1.0], 0.1), &f).unwrap();
        assert!((s.velocity[0] - 0.2).abs() < 1e-15);
        assert!((s.theta[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_lr() {
        let f = SeparablePolynomial::square().with_dim(1);
        let s = adam_step(&AdamState::new(vec![1.0], 0.1), &f).unwrap();
        assert!((s.theta[0] - 0.9).abs() < 1e-8);
    }

    #[test]
    fn sd_square_and_fourth_power() {
        let sq = SeparablePolynomial::square().with_dim(1);
        let (th, a) = steepest_descent_step(&[1.0], &sq).unwrap();
        assert!((a - 0.5).abs() < 1e-14 && th[0].abs() < 1e-14);
        let p4 = SeparablePolynomial::new([0.0, 0.0, 0.0, 0.0, 1.0], 1);
        let (th, a) = steepest_descent_step(&[1.0], &p4).unwrap();
        assert!((a - 0.25).abs() < 1e-6 && th[0].abs() < 1e-5);
    }

    #[test]
    fn quartic_picks_global_minimizer() {
        // φ(α) = (α - 1)²(α - 3)² - 0.5 α has two wells; the right one is lower.
        let c = [9.0, -24.0 - 0.5, 22.0, -8.0, 1.0];
        let a = minimize_quartic_ray(&c).unwrap();
        assert!((a - 3.0).abs() < 0.2, "{a}");
    }
}
