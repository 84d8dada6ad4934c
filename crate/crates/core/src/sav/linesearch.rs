//! The `r = (f + C)^q` generalization and its line-search reading.
//!
//! With restart `r_k = (f(θ_k) + C)^q` the update is `θ_{k+1} = θ_k + α_k P_k` where
//! `P_k = -A⁻¹∇f(θ_k)` and `α_k = δt / (1 + δt q (∇f, A⁻¹∇f) / (f + C))`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm};
use crate::objective::{eval, grad, shifted_value, Objective};
use crate::operators::Operator;

use super::{check_dt, explicit_update, pow_q, precondition, SavState, StepReport};

/// Maximum number of step halvings tried by the Wolfe backtracking.
pub const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QParams {
    pub q: f64,
    /// Re-anchor `r_k = (f(θ_k) + C)^q` before every step.
    pub restart: bool,
}

impl QParams {
    pub fn new(q: f64, restart: bool) -> Result<Self> {
        if !(q > 0.0 && q.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "q must be positive, got {q}"
            )));
        }
        Ok(Self { q, restart })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WolfeParams {
    pub c1: f64,
    pub c2: f64,
}

impl Default for WolfeParams {
    fn default() -> Self {
        Self { c1: 1e-4, c2: 0.9 }
    }
}

impl WolfeParams {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        if !(0.0 < c1 && c1 < c2 && c2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "need 0 < c1 < c2 < 1, got {c1}, {c2}"
            )));
        }
        Ok(Self { c1, c2 })
    }
}

/// One step of the `q`-generalized scheme.
pub fn rsavq_step<O, L>(
    state: &SavState,
    obj: &O,
    op: &L,
    qp: &QParams,
    dt: f64,
) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    check_dt(dt)?;
    let fc = shifted_value(obj, &state.theta)?;
    let r = if qp.restart { pow_q(fc, qp.q) } else { state.r };
    let p = precondition(obj, op, &state.theta, dt)?;
    let (theta, r1, alpha) = explicit_update(&state.theta, r, dt, qp.q, fc, &p.g_hat, p.dot)?;
    let report = StepReport {
        f: fc - obj.shift(),
        r,
        grad_norm: norm(&p.g),
        indicator: r / fc.sqrt(),
        dt,
        alpha,
        ..Default::default()
    };
    Ok((
        SavState {
            theta,
            r: r1,
            dt,
            k: state.k + 1,
        },
        report,
    ))
}

/// Evaluate `(sufficient decrease, curvature)` for the step `θ + α P`.
pub fn wolfe_check<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    dir: &[f64],
    alpha: f64,
    wolfe: &WolfeParams,
) -> Result<(bool, bool)> {
    WolfeParams::new(wolfe.c1, wolfe.c2)?;
    let g0 = grad(obj, theta)?;
    let slope = dot(&g0, dir);
    if !(slope < 0.0) {
        return Err(Error::NotDescent(slope));
    }
    Ok(wolfe_with_slope(
        obj,
        theta,
        dir,
        alpha,
        wolfe,
        eval(obj, theta)?,
        slope,
    ))
}

fn wolfe_with_slope<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    dir: &[f64],
    alpha: f64,
    wolfe: &WolfeParams,
    f0: f64,
    slope: f64,
) -> (bool, bool) {
    let trial = axpy(theta, alpha, dir);
    let f1 = obj.value(&trial);
    let g1 = obj.gradient(&trial);
    let sufficient = f1 <= f0 + wolfe.c1 * alpha * slope;
    let curvature = dot(&g1, dir) >= wolfe.c2 * slope;
    (sufficient, curvature)
}

/// Restarted `q`-scheme step as a line search along `P_k = -A⁻¹∇f(θ_k)`.
///
/// With `wolfe` set, halves `δt` (recomputing `P_k` and `α_k`) up to
/// [`MAX_HALVINGS`] times until both Wolfe conditions hold.
pub fn linesearch_sav_step<O, L>(
    state: &SavState,
    obj: &O,
    op: &L,
    qp: &QParams,
    dt: f64,
    wolfe: Option<&WolfeParams>,
) -> Result<(SavState, StepReport)>
where
    O: Objective + ?Sized,
    L: Operator + ?Sized,
{
    check_dt(dt)?;
    if let Some(w) = wolfe {
        WolfeParams::new(w.c1, w.c2)?;
    }
    let fc = shifted_value(obj, &state.theta)?;
    let f0 = fc - obj.shift();
    let r = pow_q(fc, qp.q);
    let mut dt = dt;
    let mut halvings = 0;
    loop {
        let p = precondition(obj, op, &state.theta, dt)?;
        let (theta, r1, alpha) = explicit_update(&state.theta, r, dt, qp.q, fc, &p.g_hat, p.dot)?;
        let accepted = match wolfe {
            None => true,
            Some(_) if p.dot == 0.0 => true,
            Some(w) => {
                let dir: Vec<f64> = p.g_hat.iter().map(|x| -x).collect();
                let (sd, curv) = wolfe_with_slope(obj, &state.theta, &dir, alpha, w, f0, -p.dot);
                sd && curv
            }
        };
        if accepted {
            let report = StepReport {
                f: f0,
                r,
                grad_norm: norm(&p.g),
                indicator: r / fc.sqrt(),
                dt,
                alpha,
                ..Default::default()
            };
            return Ok((
                SavState {
                    theta,
                    r: r1,
                    dt,
                    k: state.k + 1,
                },
                report,
            ));
        }
        if halvings == MAX_HALVINGS {
            return Err(Error::WolfeNotFound(MAX_HALVINGS));
        }
        halvings += 1;
        dt *= 0.5;
    }
}

/// Closed-form step sizes for `f(θ) = ½‖Aθ - b‖²` at `θ`: the large-`δt` limit
/// of the restarted `q = ½` step and the exact steepest-descent step.
///
/// With `r = Aθ - b` and `z = Aᵀr`: `α = (r, r) / (z, z)`, `β = (z, z) / (Az, Az)`.
pub fn quadratic_alpha_oracle(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    theta: &[f64],
) -> Result<(f64, f64)> {
    if !a.is_square() {
        return Err(Error::InvalidParameter(format!(
            "matrix must be square, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    crate::error::check_dim(a.nrows(), b.len())?;
    crate::error::check_dim(a.ncols(), theta.len())?;
    let r = a * DVector::from_column_slice(theta) - b;
    let z = a.tr_mul(&r);
    let zz = z.dot(&z);
    if r.dot(&r) == 0.0 || zz == 0.0 {
        return Err(Error::AtMinimum);
    }
    let az = a * &z;
    Ok((r.dot(&r) / zz, zz / az.dot(&az)))
}
