//! SAV-family steppers.
//!
//! Every stepper is a pure map `(state, objective, operator, step) -> (state, report)`.
//! With `A = I + δt L`, the explicit modified SAV update is
//!
//! ```text
//! r_{k+1} = r_k / (1 + δt (g, A⁻¹g) / (2 (f + C)))
//! θ_{k+1} = θ_k - δt r_{k+1} / √(f + C) · A⁻¹g
//! ```
//!
//! where `f = f(θ_k)` and `g = ∇f(θ_k)`.

mod linesearch;
mod relax;

pub use linesearch::{
    linesearch_sav_step, quadratic_alpha_oracle, rsavq_step, wolfe_check, QParams, WolfeParams,
    MAX_HALVINGS,
};
pub use relax::{adaptive_rsav_step, compute_xi, rsav_step, AdaptiveParams, RelaxParams};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, axpy, dot, norm, sub};
use crate::objective::{grad, shifted_value, Objective};
use crate::operators::Operator;

/// Iterate of a SAV-family method.
#[derive(Debug, Clone, PartialEq)]
pub struct SavState {
    pub theta: Vec<f64>,
    /// Auxiliary variable approximating `(f + C)^q`.
    pub r: f64,
    /// Step size of the most recent step (the initial step before any).
    pub dt: f64,
    pub k: usize,
}

impl SavState {
    /// Start with `r_0 = √(f(θ_0) + C)`.
    pub fn new<O: Objective + ?Sized>(obj: &O, theta: Vec<f64>, dt: f64) -> Result<Self> {
        Self::with_exponent(obj, theta, dt, 0.5)
    }

    /// Start with `r_0 = (f(θ_0) + C)^q`.
    pub fn with_exponent<O: Objective + ?Sized>(
        obj: &O,
        theta: Vec<f64>,
        dt: f64,
        q: f64,
    ) -> Result<Self> {
        check_dt(dt)?;
        let fc = shifted_value(obj, &theta)?;
        Ok(Self {
            theta,
            r: pow_q(fc, q),
            dt,
            k: 0,
        })
    }

    /// `r_k / √(f(θ_k) + C)`.
    pub fn indicator<O: Objective + ?Sized>(&self, obj: &O) -> Result<f64> {
        Ok(self.r / shifted_value(obj, &self.theta)?.sqrt())
    }
}

/// Per-step diagnostics. Quantities indexed `k` refer to the state the step
/// started from.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    /// `f(θ_k)`.
    pub f: f64,
    /// `r_k` as used by the step (after any restart).
    pub r: f64,
    /// Norm of the gradient the step used.
    pub grad_norm: f64,
    /// `r_k / √(f(θ_k) + C)`.
    pub indicator: f64,
    /// Step size used.
    pub dt: f64,
    /// Effective step on the preconditioned gradient: `θ_{k+1} = θ_k - α A⁻¹g`.
    pub alpha: f64,
    /// Unrelaxed auxiliary update, when the method relaxes or resets it.
    pub r_tilde: Option<f64>,
    /// Relaxation weight.
    pub xi: Option<f64>,
    /// `𝒢(θ_{k+1}, θ_k) = -2 (r̃ - r_k) r̃`.
    pub energy_gap: Option<f64>,
    /// `f(θ_{k+1})` when the step had to evaluate it.
    pub f_next: Option<f64>,
}

pub(crate) fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "step size must be positive, got {dt}"
        )))
    }
}

pub(crate) fn pow_q(x: f64, q: f64) -> f64 {
    if q == 0.5 {
        x.sqrt()
    } else {
        x.powf(q)
    }
}

/// Shared explicit update:
/// `r₁ = r / (1 + δt q (g, ĝ) / fc)`, `θ₁ = θ - δt (r₁ / fc^q) ĝ`.
/// Returns `(θ₁, r₁, α)` with `α = δt r₁ / fc^q`.
pub(crate) fn explicit_update(
    theta: &[f64],
    r: f64,
    dt: f64,
    q: f64,
    fc: f64,
    g_hat: &[f64],
    g_dot_ghat: f64,
) -> Result<(Vec<f64>, f64, f64)> {
    let denom = 1.0 + dt * q * g_dot_ghat / fc;
    let r1 = r / denom;
    let alpha = dt * (r1 / pow_q(fc, q));
    let theta1 = axpy(theta, -alpha, g_hat);
    if !(r1.is_finite() && all_finite(&theta1)) {
        return Err(Error::Diverged("non-finite SAV update".into()));
    }
    Ok((theta1, r1, alpha))
}

/// Gradient, preconditioned gradient and their inner product at `θ`.
pub(crate) struct Preconditioned {
    pub g: Vec<f64>,
    pub g_hat: Vec<f64>,
    pub dot: f64,
}

pub(crate) fn precondition<O, L>(obj: &O, op: &L, theta: &[f64], dt: f64) -> Result<Preconditioned>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    let g = grad(obj, theta)?;
    let g_hat = op.solve_shifted(dt, &g)?;
    let dot = dot(&g, &g_hat);
    Ok(Preconditioned { g, g_hat, dot })
}

/// Modified SAV step with operator `L`.
pub fn modified_sav_step<O, L>(
    state: &SavState,
    obj: &O,
    op: &L,
    dt: f64,
) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    check_dt(dt)?;
    let fc = shifted_value(obj, &state.theta)?;
    let p = precondition(obj, op, &state.theta, dt)?;
    let (theta, r, alpha) = explicit_update(&state.theta, state.r, dt, 0.5, fc, &p.g_hat, p.dot)?;
    let report = StepReport {
        f: fc - obj.shift(),
        r: state.r,
        grad_norm: norm(&p.g),
        indicator: state.r / fc.sqrt(),
        dt,
        alpha,
        ..Default::default()
    };
    Ok((
        SavState {
            theta,
            r,
            dt,
            k: state.k + 1,
        },
        report,
    ))
}

/// SAV gradient descent: the `L = 0` case, with no linear solve.
pub fn savgd_step<O>(state: &SavState, obj: &O, dt: f64) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
{
    check_dt(dt)?;
    let fc = shifted_value(obj, &state.theta)?;
    let g = grad(obj, &state.theta)?;
    let gg = dot(&g, &g);
    let (theta, r, alpha) = explicit_update(&state.theta, state.r, dt, 0.5, fc, &g, gg)?;
    let report = StepReport {
        f: fc - obj.shift(),
        r: state.r,
        grad_norm: gg.sqrt(),
        indicator: state.r / fc.sqrt(),
        dt,
        alpha,
        ..Default::default()
    };
    Ok((
        SavState {
            theta,
            r,
            dt,
            k: state.k + 1,
        },
        report,
    ))
}

/// Modified SAV step followed by the reset `r_{k+1} = √(f(θ_{k+1}) + C)`.
pub fn msav_step<O, L>(state: &SavState, obj: &O, op: &L, dt: f64) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    let (mut next, mut report) = modified_sav_step(state, obj, op, dt)?;
    let fc_next = shifted_value(obj, &next.theta)?;
    report.r_tilde = Some(next.r);
    report.f_next = Some(fc_next - obj.shift());
    next.r = fc_next.sqrt();
    Ok((next, report))
}

/// SAV step on the split `f = ½(Lθ, θ) + g` with the linear part implicit
/// and `r ≈ √(g + C_g)`.
///
/// Eliminating `θ_{k+1}` from the coupled system gives, with `h = ∇g(θ_k)`,
/// `ĥ = A⁻¹h` and `s = √(g(θ_k) + C_g)`:
///
/// ```text
/// r_{k+1} = (r_k + (h, A⁻¹θ_k - θ_k) / (2s)) / (1 + δt (h, ĥ) / (2 s²))
/// θ_{k+1} = A⁻¹θ_k - δt (r_{k+1} / s) ĥ
/// ```
///
/// Unlike the modified scheme its fixed points need not be critical points of `f`.
pub fn legacy_sav_step<O, L>(
    state: &SavState,
    obj: &O,
    op: &L,
    c_g: f64,
    dt: f64,
) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    check_dt(dt)?;
    let theta = &state.theta;
    let fc = shifted_value(obj, theta)?;
    let f = fc - obj.shift();
    let lt = op.apply(theta)?;
    let gc = f - 0.5 * dot(&lt, theta) + c_g;
    if !(gc > 0.0) {
        return Err(Error::SplittingBoundViolated(gc));
    }
    let grad_f = grad(obj, theta)?;
    let h = sub(&grad_f, &lt);
    let h_hat = op.solve_shifted(dt, &h)?;
    let a_theta = op.solve_shifted(dt, theta)?;
    let lift = dot(&h, &sub(&a_theta, theta));
    let r_num = state.r + 0.5 * lift / gc.sqrt();
    let (theta1, r1, alpha) =
        explicit_update(&a_theta, r_num, dt, 0.5, gc, &h_hat, dot(&h, &h_hat))?;
    let report = StepReport {
        f,
        r: state.r,
        grad_norm: norm(&grad_f),
        indicator: state.r / gc.sqrt(),
        dt,
        alpha,
        ..Default::default()
    };
    Ok((
        SavState {
            theta: theta1,
            r: r1,
            dt,
            k: state.k + 1,
        },
        report,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::LinearOperator;
    use crate::problems::SeparablePolynomial;

    fn square() -> SeparablePolynomial {
        SeparablePolynomial::square().with_dim(1).with_shift(1.0)
    }

    #[test]
    fn modified_sav_one_step_l_zero() {
        let f = square();
        let s = SavState::new(&f, vec![1.0], 1.0).unwrap();
        let (n, _) = modified_sav_step(&s, &f, &LinearOperator::zero(1).unwrap(), 1.0).unwrap();
        assert!((n.r - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!(n.theta[0].abs() < 1e-15);
    }

    #[test]
    fn modified_sav_one_step_l_two() {
        let f = square();
        let s = SavState::new(&f, vec![1.0], 1.0).unwrap();
        let op = LinearOperator::scaled_identity(2.0, 1).unwrap();
        let (n, _) = modified_sav_step(&s, &f, &op, 1.0).unwrap();
        assert!((n.r - 3.0 * 2.0_f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((n.theta[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn msav_resets_to_true_energy() {
        let f = square();
        let s = SavState::new(&f, vec![1.0], 1.0).unwrap();
        let (n, rep) = msav_step(&s, &f, &LinearOperator::zero(1).unwrap(), 1.0).unwrap();
        assert!(n.theta[0].abs() < 1e-15);
        assert!((n.r - 1.0).abs() < 1e-15);
        assert!((rep.r_tilde.unwrap() - 0.5_f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn stationary_point_is_fixed() {
        let f = square();
        let s = SavState::new(&f, vec![0.0], 0.3).unwrap();
        let (n, _) = savgd_step(&s, &f, 0.3).unwrap();
        assert_eq!(n.theta, s.theta);
        assert_eq!(n.r, s.r);
    }

    #[test]
    fn legacy_rejects_unbounded_splitting() {
        // g = θ² - ½·4θ² = -θ², so g + C_g < 0 at θ = 2 with C_g = 1.
        let f = square();
        let op = LinearOperator::scaled_identity(4.0, 1).unwrap();
        let s = SavState::new(&f, vec![2.0], 0.1).unwrap();
        assert!(matches!(
            legacy_sav_step(&s, &f, &op, 1.0, 0.1),
            Err(Error::SplittingBoundViolated(_))
        ));
    }
}
