//! Relaxed SAV and its adaptive step-size variant.

use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::objective::{shifted_value, Objective};
use crate::operators::Operator;

use super::{check_dt, explicit_update, precondition, SavState, StepReport};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxParams {
    /// Fraction of the dissipation `𝒢` the relaxation may give back, in `[0, 1]`.
    pub eta: f64,
}

impl Default for RelaxParams {
    fn default() -> Self {
        Self { eta: 0.99 }
    }
}

impl RelaxParams {
    pub fn new(eta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&eta) {
            return Err(Error::InvalidParameter(format!(
                "eta must lie in [0, 1], got {eta}"
            )));
        }
        Ok(Self { eta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveParams {
    pub dt_min: f64,
    /// Growth factor, `> 1`.
    pub rho: f64,
    /// Indicator threshold in `(0, 1)`.
    pub gamma: f64,
}

impl Default for AdaptiveParams {
    fn default() -> Self {
        Self {
            dt_min: 1e-6,
            rho: 1.1,
            gamma: 0.9,
        }
    }
}

impl AdaptiveParams {
    pub fn validate(&self, dt0: f64) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.rho > 1.0 && self.rho.is_finite()) {
            return bad(format!("rho must exceed 1, got {}", self.rho));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return bad(format!("gamma must lie in (0, 1), got {}", self.gamma));
        }
        if !(self.dt_min > 0.0 && self.dt_min <= dt0) {
            return bad(format!(
                "need 0 < dt_min <= dt0, got {} and {dt0}",
                self.dt_min
            ));
        }
        Ok(())
    }

    /// Step size for the next step given the current one and `I_k`.
    pub fn next_dt(&self, dt: f64, indicator: f64) -> f64 {
        if indicator < self.gamma && dt > self.dt_min {
            (indicator * dt).max(self.dt_min)
        } else {
            self.rho * dt
        }
    }
}

/// Relaxation weight `ξ ∈ [0, 1]` for `r_{k+1} = ξ r̃ + (1 - ξ) √(f(θ_{k+1}) + C)`.
///
/// With `s = √(f(θ_{k+1}) + C)` and `𝒢 = -2 (r̃ - r_k) r̃`, takes the smaller root
/// of `a ξ² + b ξ + c` where `a = (r̃ - s)²`, `b = 2 (r̃ - s) s` and
/// `c = s² - r̃² - (r̃ - r_k)² - η 𝒢`, floored at 0 and capped at 1.
pub fn compute_xi(r_tilde: f64, r_k: f64, f_next_plus_c: f64, eta: f64) -> Result<f64> {
    if !(f_next_plus_c > 0.0) {
        return Err(Error::ShiftViolated(f_next_plus_c));
    }
    if !(r_tilde.is_finite() && r_k.is_finite()) {
        return Err(Error::NonFiniteInput("auxiliary variable".into()));
    }
    let s = f_next_plus_c.sqrt();
    let d = r_tilde - s;
    let a = d * d;
    if a <= 1e-24 {
        return Ok(0.0);
    }
    let b = 2.0 * d * s;
    let gap = -2.0 * (r_tilde - r_k) * r_tilde;
    let c = (s - r_tilde) * (s + r_tilde) - (r_tilde - r_k).powi(2) - eta * gap;
    let disc = (b * b - 4.0 * a * c).max(0.0);
    let sq = disc.sqrt();
    // Smaller root, in the form that avoids cancellation.
    let root = if b > 0.0 {
        (-b - sq) / (2.0 * a)
    } else {
        (2.0 * c) / (-b + sq)
    };
    let root = if root.is_nan() { 0.0 } else { root };
    Ok(root.clamp(0.0, 1.0))
}

pub(crate) fn rsav_at<O, L>(
    state: &SavState,
    obj: &O,
    op: &L,
    relax: &RelaxParams,
    dt: f64,
    fc: f64,
) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    let p = precondition(obj, op, &state.theta, dt)?;
    let (theta, r_tilde, alpha) =
        explicit_update(&state.theta, state.r, dt, 0.5, fc, &p.g_hat, p.dot)?;
    let fc_next = shifted_value(obj, &theta)?;
    let xi = compute_xi(r_tilde, state.r, fc_next, relax.eta)?;
    let r = xi * r_tilde + (1.0 - xi) * fc_next.sqrt();
    let report = StepReport {
        f: fc - obj.shift(),
        r: state.r,
        grad_norm: norm(&p.g),
        indicator: state.r / fc.sqrt(),
        dt,
        alpha,
        r_tilde: Some(r_tilde),
        xi: Some(xi),
        energy_gap: Some(-2.0 * (r_tilde - state.r) * r_tilde),
        f_next: Some(fc_next - obj.shift()),
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

/// One relaxed SAV step.
pub fn rsav_step<O, L>(
    state: &SavState,
    obj: &O,
    op: &L,
    relax: &RelaxParams,
    dt: f64,
) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    check_dt(dt)?;
    let fc = shifted_value(obj, &state.theta)?;
    rsav_at(state, obj, op, relax, dt, fc)
}

/// Update the step size from the indicator `I_k = r_k / √(f(θ_k) + C)`, then
/// take one relaxed step with it. `state.dt` carries the step size between calls.
pub fn adaptive_rsav_step<O, L>(
    state: &SavState,
    obj: &O,
    op: &L,
    relax: &RelaxParams,
    adapt: &AdaptiveParams,
) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    check_dt(state.dt)?;
    let fc = shifted_value(obj, &state.theta)?;
    let indicator = state.r / fc.sqrt();
    let dt = adapt.next_dt(state.dt, indicator);
    check_dt(dt)?;
    rsav_at(state, obj, op, relax, dt, fc)
}
