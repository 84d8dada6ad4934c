//! Numerical self-checks: operator properties, SAV energy laws and
//! problem gradients. Each check reports its measured residual.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm, sub};
use crate::objective::{quartic_value, Objective};
use crate::operators::{laplacian_symbol, LinearOperator, Operator};
use crate::problems::{
    synth_ratings, ComplexVector, PhaseRetrieval, Quadratic, Rastrigin, Rosenbrock, SynthSpec,
    TruthKind,
};
use crate::sav::{
    adaptive_rsav_step, legacy_sav_step, modified_sav_step, rsav_step, rsavq_step, savgd_step,
    AdaptiveParams, QParams, RelaxParams, SavState,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Operators,
    Sav,
    Problems,
    All,
}

impl FromStr for Scope {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "operators" => Ok(Scope::Operators),
            "sav" => Ok(Scope::Sav),
            "problems" => Ok(Scope::Problems),
            "all" => Ok(Scope::All),
            other => Err(Error::InvalidParameter(format!("unknown scope {other:?}"))),
        }
    }
}

impl fmt::Display for Scope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scope::Operators => "operators",
            Scope::Sav => "sav",
            Scope::Problems => "problems",
            Scope::All => "all",
        })
    }
}

#[derive(Debug, Clone)]
pub struct Check {
    pub scope: Scope,
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct VerifyReport {
    pub checks: Vec<Check>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    fn push(
        &mut self,
        scope: Scope,
        name: impl Into<String>,
        outcome: Result<f64>,
        tolerance: f64,
    ) {
        let (residual, passed) = match outcome {
            Ok(r) => (r, r <= tolerance),
            Err(_) => (f64::NAN, false),
        };
        self.checks.push(Check {
            scope,
            name: name.into(),
            residual,
            tolerance,
            passed,
        });
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "[{}] {:<9} {:<58} residual {:.3e} (tol {:.0e})",
                if c.passed { "PASS" } else { "FAIL" },
                c.scope.to_string(),
                c.name,
                c.residual,
                c.tolerance
            )?;
        }
        let failed = self.checks.iter().filter(|c| !c.passed).count();
        write!(f, "{} checks, {} failed", self.checks.len(), failed)
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

// ---------------------------------------------------------------- operators

/// `max(0, -min (Lv, v) / (v, v))` over seeded random vectors.
pub fn operator_negativity(op: &dyn Operator, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let v = gaussian(&mut rng, op.dim());
        let q = dot(&op.apply(&v)?, &v) / dot(&v, &v);
        worst = worst.max(-q);
    }
    Ok(worst)
}

/// `max |(Lu, v) - (u, Lv)| / (‖Lu‖‖v‖ + ‖u‖‖Lv‖ + tiny)`.
pub fn operator_asymmetry(op: &dyn Operator, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for _ in 0..samples {
        let u = gaussian(&mut rng, op.dim());
        let v = gaussian(&mut rng, op.dim());
        let (lu, lv) = (op.apply(&u)?, op.apply(&v)?);
        let scale = norm(&lu) * norm(&v) + norm(&u) * norm(&lv) + f64::MIN_POSITIVE;
        worst = worst.max((dot(&lu, &v) - dot(&u, &lv)).abs() / scale);
    }
    Ok(worst)
}

/// `‖(I + dt L) x - b‖ / ‖b‖` for `x = solve_shifted(dt, b)`.
pub fn shifted_solve_residual(op: &dyn Operator, dt: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = gaussian(&mut rng, op.dim());
    let x = op.solve_shifted(dt, &b)?;
    Ok(norm(&sub(&op.apply_shift(dt, &x)?, &b)) / norm(&b))
}

/// Largest mismatch between `-Δ` applied to Fourier modes and its symbol.
pub fn laplacian_symbol_residual(n: usize) -> Result<f64> {
    let op = LinearOperator::laplacian(1.0, n)?;
    let mut worst = 0.0_f64;
    for j in 0..n {
        let v: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * (i * j) as f64 / n as f64).cos())
            .collect();
        let lv = op.apply(&v)?;
        let s = laplacian_symbol(j, n);
        let r = lv
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - s * b).abs())
            .fold(0.0, f64::max);
        worst = worst.max(r);
    }
    Ok(worst)
}

// ---------------------------------------------------------------- sav laws

/// Increment `-α Â⁻¹∇f(θ₀)` prescribed by an explicit SAV step with step length `α`.
///
/// Once `r` is small the step can fall below the spacing of the stored
/// iterates, so the identities are evaluated on this increment and the stored
/// iterate is checked separately with [`iterate_error`].
pub fn applied_increment<O: Objective + ?Sized>(
    obj: &O,
    op: &dyn Operator,
    theta0: &[f64],
    dt: f64,
    alpha: f64,
) -> Result<Vec<f64>> {
    let g_hat = op.solve_shifted(dt, &obj.gradient(theta0))?;
    Ok(g_hat.iter().map(|x| -alpha * x).collect())
}

/// Largest componentwise `|θ₁ - θ₀ - d| / (|θ₀| + |d|)`.
pub fn iterate_error(theta0: &[f64], theta1: &[f64], d: &[f64]) -> f64 {
    theta0
        .iter()
        .zip(theta1)
        .zip(d)
        .map(|((a, b), x)| {
            let scale = a.abs() + x.abs();
            if scale == 0.0 {
                b.abs()
            } else {
                (b - a - x).abs() / scale
            }
        })
        .fold(0.0, f64::max)
}

/// Residual of `r₁² - r₀² + ‖d‖²/δt + (Ld, d) + (r₁ - r₀)² = 0` for the
/// increment `d`, relative to the sum of the term magnitudes and `r₀² + r₁²`.
pub fn energy_identity_residual(
    op: &dyn Operator,
    dt: f64,
    d: &[f64],
    r0: f64,
    r1: f64,
) -> Result<f64> {
    let terms = [
        (r1 - r0) * (r1 + r0),
        dot(d, d) / dt,
        dot(&op.apply(d)?, d),
        (r1 - r0).powi(2),
    ];
    let scale = r1 * r1 + r0 * r0 + terms[1].abs() + terms[2].abs() + terms[3];
    Ok(terms.iter().sum::<f64>().abs() / scale.max(f64::MIN_POSITIVE))
}

/// Mismatch between `(d, Ad)/δt` and `-2(r̃ - r₀) r̃`, normalized as in
/// [`energy_identity_residual`].
pub fn gap_identity_residual(
    op: &dyn Operator,
    dt: f64,
    d: &[f64],
    r0: f64,
    r_tilde: f64,
) -> Result<f64> {
    let lhs = dot(d, d) / dt + dot(&op.apply(d)?, d);
    let rhs = -2.0 * (r_tilde - r0) * r_tilde;
    let scale = lhs.abs() + rhs.abs() + r0 * r0 + r_tilde * r_tilde;
    Ok((lhs - rhs).abs() / scale.max(f64::MIN_POSITIVE))
}

/// `r₁² - r₀² + (1 - η) 𝒢`; the relaxed schemes keep this `≤ 0`.
pub fn dissipation_excess(r0: f64, r1: f64, eta: f64, gap: f64) -> f64 {
    (r1 - r0) * (r1 + r0) + (1.0 - eta) * gap
}

/// Identity diagnostics of an explicit SAV run.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityRunStats {
    /// Largest relative energy-identity residual.
    pub max_residual: f64,
    /// Largest [`iterate_error`].
    pub max_iterate_error: f64,
}

/// Energy-identity diagnostics over a modified SAV run (or SAV-GD when `op` is `None`).
pub fn energy_identity_run<O: Objective + ?Sized>(
    obj: &O,
    op: Option<&LinearOperator>,
    theta0: Vec<f64>,
    dt: f64,
    steps: usize,
) -> Result<IdentityRunStats> {
    let zero = LinearOperator::zero(theta0.len())?;
    let l = op.unwrap_or(&zero);
    let mut s = SavState::new(obj, theta0, dt)?;
    let mut st = IdentityRunStats::default();
    for _ in 0..steps {
        let (n, rep) = match op {
            Some(op) => modified_sav_step(&s, obj, op, dt)?,
            None => savgd_step(&s, obj, dt)?,
        };
        let d = applied_increment(obj, l, &s.theta, dt, rep.alpha)?;
        st.max_residual = st
            .max_residual
            .max(energy_identity_residual(l, dt, &d, s.r, n.r)?);
        st.max_iterate_error = st
            .max_iterate_error
            .max(iterate_error(&s.theta, &n.theta, &d));
        s = n;
    }
    Ok(st)
}

/// Relaxed-run diagnostics.
#[derive(Debug, Clone, Copy, Default)]
pub struct RelaxedRunStats {
    /// Largest `r₁² - r₀² + (1 - η)𝒢`.
    pub max_excess: f64,
    /// Largest relative gap-identity residual.
    pub max_gap_residual: f64,
    /// Largest relative departure from equality on steps that took an interior root.
    pub max_interior_equality: f64,
    /// Largest increase of `r²` over the run.
    pub max_r2_increase: f64,
    /// Largest [`iterate_error`].
    pub max_iterate_error: f64,
}

/// Run relaxed (or adaptive relaxed) SAV and collect the dissipation diagnostics.
pub fn relaxed_run<O: Objective + ?Sized>(
    obj: &O,
    op: &LinearOperator,
    theta0: Vec<f64>,
    dt: f64,
    steps: usize,
    adaptive: bool,
) -> Result<RelaxedRunStats> {
    let relax = RelaxParams::default();
    let adapt = AdaptiveParams {
        dt_min: AdaptiveParams::default().dt_min.min(dt),
        ..Default::default()
    };
    let mut s = SavState::new(obj, theta0, dt)?;
    let mut st = RelaxedRunStats::default();
    for _ in 0..steps {
        let (n, rep) = if adaptive {
            adaptive_rsav_step(&s, obj, op, &relax, &adapt)?
        } else {
            rsav_step(&s, obj, op, &relax, dt)?
        };
        let gap = rep.energy_gap.unwrap_or(0.0);
        let r_tilde = rep.r_tilde.unwrap_or(n.r);
        let excess = dissipation_excess(s.r, n.r, relax.eta, gap);
        st.max_excess = st.max_excess.max(excess);
        let d = applied_increment(obj, op, &s.theta, rep.dt, rep.alpha)?;
        st.max_gap_residual = st
            .max_gap_residual
            .max(gap_identity_residual(op, rep.dt, &d, s.r, r_tilde)?);
        st.max_iterate_error = st
            .max_iterate_error
            .max(iterate_error(&s.theta, &n.theta, &d));
        if let Some(xi) = rep.xi {
            if xi > 0.0 && xi < 1.0 {
                let scale = (n.r * n.r + s.r * s.r).max(f64::MIN_POSITIVE);
                st.max_interior_equality = st.max_interior_equality.max(excess.abs() / scale);
            }
        }
        st.max_r2_increase = st.max_r2_increase.max((n.r - s.r) * (n.r + s.r));
        s = n;
    }
    Ok(st)
}

fn dense(op: &dyn Operator) -> Result<DMatrix<f64>> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        for (i, v) in op.apply(&e)?.into_iter().enumerate() {
            m[(i, j)] = v;
        }
    }
    Ok(m)
}

/// Solve the coupled `(θ, r)` system of one modified SAV step densely and
/// return `max(|Δθ|, |Δr|)` against the explicit update.
pub fn block_system_residual<O: Objective + ?Sized>(
    obj: &O,
    op: &dyn Operator,
    theta: &[f64],
    dt: f64,
) -> Result<f64> {
    let n = theta.len();
    let s = SavState::new(obj, theta.to_vec(), dt)?;
    let fc = obj.value(theta) + obj.shift();
    let sq = fc.sqrt();
    let g = obj.gradient(theta);
    let l = dense(op)?;
    // Unknowns (Δθ, r₁):
    //   (I/δt + L) Δθ + (g/√fc) r₁ = 0
    //   -(g, Δθ)/(2√fc) + r₁ = r₀
    let mut m = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = l[(i, j)] + if i == j { 1.0 / dt } else { 0.0 };
        }
        m[(i, n)] = g[i] / sq;
        m[(n, i)] = -g[i] / (2.0 * sq);
    }
    m[(n, n)] = 1.0;
    rhs[n] = s.r;
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("singular block system".into()))?;
    let (e, _) = modified_sav_step(&s, obj, op, dt)?;
    let mut worst = (x[n] - e.r).abs();
    for i in 0..n {
        worst = worst.max((theta[i] + x[i] - e.theta[i]).abs());
    }
    Ok(worst)
}

/// As [`block_system_residual`] for the split scheme with the linear part implicit.
pub fn legacy_block_residual<O: Objective + ?Sized>(
    obj: &O,
    op: &dyn Operator,
    c_g: f64,
    theta: &[f64],
    r0: f64,
    dt: f64,
) -> Result<f64> {
    let n = theta.len();
    let l = dense(op)?;
    let lt = op.apply(theta)?;
    let gc = obj.value(theta) - 0.5 * dot(&lt, theta) + c_g;
    let sq = gc.sqrt();
    let h = sub(&obj.gradient(theta), &lt);
    // Unknowns (θ₁, r₁):
    //   (I/δt + L) θ₁ + (h/s) r₁ = θ₀/δt
    //   -(h, θ₁)/(2s) + r₁ = r₀ - (h, θ₀)/(2s)
    let mut m = DMatrix::zeros(n + 1, n + 1);
    let mut rhs = DVector::zeros(n + 1);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = l[(i, j)] + if i == j { 1.0 / dt } else { 0.0 };
        }
        m[(i, n)] = h[i] / sq;
        m[(n, i)] = -h[i] / (2.0 * sq);
        rhs[i] = theta[i] / dt;
    }
    m[(n, n)] = 1.0;
    rhs[n] = r0 - dot(&h, theta) / (2.0 * sq);
    let x = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::InvalidParameter("singular block system".into()))?;
    let s = SavState {
        theta: theta.to_vec(),
        r: r0,
        dt,
        k: 0,
    };
    let (e, _) = legacy_sav_step(&s, obj, op, c_g, dt)?;
    let mut worst = (x[n] - e.r).abs();
    for i in 0..n {
        worst = worst.max((x[i] - e.theta[i]).abs());
    }
    Ok(worst)
}

/// Number of steps (out of `steps`) where the two runs differ in any bit.
pub fn collapse_mismatches<O: Objective + ?Sized>(
    obj: &O,
    theta0: Vec<f64>,
    dt: f64,
    steps: usize,
) -> Result<usize> {
    let zero = LinearOperator::zero(theta0.len())?;
    let qp = QParams::new(0.5, false)?;
    let mut a = SavState::new(obj, theta0, dt)?;
    let (mut b, mut c) = (a.clone(), a.clone());
    let mut mismatches = 0;
    for _ in 0..steps {
        a = savgd_step(&a, obj, dt)?.0;
        b = modified_sav_step(&b, obj, &zero, dt)?.0;
        c = rsavq_step(&c, obj, &zero, &qp, dt)?.0;
        let same = |x: &SavState| {
            x.r.to_bits() == a.r.to_bits()
                && x.theta
                    .iter()
                    .zip(&a.theta)
                    .all(|(p, q)| p.to_bits() == q.to_bits())
        };
        if !(same(&b) && same(&c)) {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

// ---------------------------------------------------------------- problems

/// Largest `|central difference - (∇f, δ)| / (1 + |f|)` over seeded unit directions.
pub fn finite_difference_error<O: Objective + ?Sized>(
    obj: &O,
    points: &[Vec<f64>],
    seed: u64,
) -> f64 {
    let h = 1e-6;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for theta in points {
        let mut d = gaussian(&mut rng, theta.len());
        let nd = norm(&d);
        d.iter_mut().for_each(|x| *x /= nd);
        let plus: Vec<f64> = theta.iter().zip(&d).map(|(t, x)| t + h * x).collect();
        let minus: Vec<f64> = theta.iter().zip(&d).map(|(t, x)| t - h * x).collect();
        let fd = (obj.value(&plus) - obj.value(&minus)) / (2.0 * h);
        let an = dot(&obj.gradient(theta), &d);
        worst = worst.max((fd - an).abs() / (1.0 + obj.value(theta).abs()));
    }
    worst
}

/// Largest relative mismatch between the quartic ray and direct evaluation.
pub fn quartic_ray_error<O: Objective + ?Sized>(
    obj: &O,
    points: &[Vec<f64>],
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0_f64;
    for theta in points {
        let d = gaussian(&mut rng, theta.len());
        let c = obj
            .quartic_ray(theta, &d)
            .ok_or(Error::Unsupported("quartic ray expansion"))?;
        for alpha in [0.0, 0.1, 1.0, -2.0] {
            let p: Vec<f64> = theta.iter().zip(&d).map(|(t, x)| t + alpha * x).collect();
            let direct = obj.value(&p);
            worst = worst.max((quartic_value(&c, alpha) - direct).abs() / (1.0 + direct.abs()));
        }
    }
    Ok(worst)
}

fn random_points(n: usize, count: usize, scale: f64, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            gaussian(&mut rng, n)
                .into_iter()
                .map(|x| scale * x)
                .collect()
        })
        .collect()
}

fn check_operators(rep: &mut VerifyReport) {
    let n = 16;
    let ops: Vec<(&str, Result<LinearOperator>)> = vec![
        ("zero", LinearOperator::zero(n)),
        ("scaled identity", LinearOperator::scaled_identity(0.7, n)),
        (
            "diagonal",
            LinearOperator::diagonal((0..n).map(|i| (i % 3) as f64).collect()),
        ),
        ("laplacian", LinearOperator::laplacian(0.3, n)),
        ("composite", LinearOperator::composite(1e-4, 0.1, n)),
    ];
    for (name, op) in ops {
        let op = match op {
            Ok(op) => op,
            Err(e) => {
                rep.push(
                    Scope::Operators,
                    format!("{name}: construction"),
                    Err(e),
                    0.0,
                );
                continue;
            }
        };
        rep.push(
            Scope::Operators,
            format!("{name}: nonnegativity"),
            operator_negativity(&op, 50, 1),
            1e-12,
        );
        rep.push(
            Scope::Operators,
            format!("{name}: self-adjointness"),
            operator_asymmetry(&op, 50, 2),
            1e-12,
        );
        for dt in [0.01, 1.0, 100.0] {
            rep.push(
                Scope::Operators,
                format!("{name}: shifted solve residual dt={dt}"),
                shifted_solve_residual(&op, dt, 3),
                1e-10,
            );
        }
    }
    for n in [1, 4, 7, 64] {
        rep.push(
            Scope::Operators,
            format!("laplacian symbol n={n}"),
            laplacian_symbol_residual(n),
            1e-12,
        );
    }
}

fn push_identity(rep: &mut VerifyReport, label: &str, stats: Result<IdentityRunStats>) {
    let (res, it) = match stats {
        Ok(s) => (Ok(s.max_residual), Ok(s.max_iterate_error)),
        Err(e) => (Err(Error::Diverged(e.to_string())), Err(e)),
    };
    rep.push(Scope::Sav, format!("energy identity, {label}"), res, 1e-9);
    rep.push(
        Scope::Sav,
        format!("stored iterate, {label}"),
        it,
        f64::EPSILON,
    );
}

fn check_sav(rep: &mut VerifyReport) {
    let quad = Quadratic::benchmark();
    let rosen = Rosenbrock::standard(2);
    let qn = quad.dim();
    let quad_ops: Vec<(&str, Option<LinearOperator>)> = vec![
        ("L=0 (savgd)", None),
        ("L=D", Some(quad.hessian_operator())),
        ("L=I", LinearOperator::scaled_identity(1.0, qn).ok()),
        ("L=-0.5Δ", LinearOperator::laplacian(0.5, qn).ok()),
    ];
    for dt in [0.01, 0.1, 1.0, 10.0] {
        for (name, op) in &quad_ops {
            push_identity(
                rep,
                &format!("quadratic {name} dt={dt}"),
                energy_identity_run(&quad, op.as_ref(), vec![1.0; qn], dt, 500),
            );
        }
        let rops: Vec<(&str, Option<LinearOperator>)> = vec![
            ("L=0", LinearOperator::zero(2).ok()),
            (
                "L=diag(2,0.02)",
                LinearOperator::diagonal(vec![2.0, 0.02]).ok(),
            ),
            ("L=I", LinearOperator::scaled_identity(1.0, 2).ok()),
            ("L=-0.5Δ", LinearOperator::laplacian(0.5, 2).ok()),
        ];
        for (name, op) in &rops {
            push_identity(
                rep,
                &format!("rosenbrock {name} dt={dt}"),
                energy_identity_run(&rosen, op.as_ref(), vec![-3.0, -4.0], dt, 500),
            );
        }
    }
    for adaptive in [false, true] {
        let tag = if adaptive { "adaptive rsav" } else { "rsav" };
        for dt in [0.01, 1.0] {
            for (pname, stats) in [
                (
                    "quadratic",
                    relaxed_run(
                        &quad,
                        &quad.hessian_operator(),
                        vec![1.0; qn],
                        dt,
                        500,
                        adaptive,
                    ),
                ),
                (
                    "rosenbrock",
                    LinearOperator::zero(2)
                        .and_then(|z| relaxed_run(&rosen, &z, vec![-3.0, -4.0], dt, 500, adaptive)),
                ),
            ] {
                let (excess, gap, eq, it) = match stats {
                    Ok(s) => (
                        Ok(s.max_excess),
                        Ok(s.max_gap_residual),
                        Ok(s.max_interior_equality),
                        Ok(s.max_iterate_error),
                    ),
                    Err(e) => {
                        let m = e.to_string();
                        let err = || Err(Error::Diverged(m.clone()));
                        (err(), err(), err(), err())
                    }
                };
                rep.push(
                    Scope::Sav,
                    format!("{tag} dissipation inequality, {pname} dt={dt}"),
                    excess,
                    1e-12,
                );
                rep.push(
                    Scope::Sav,
                    format!("{tag} gap identity, {pname} dt={dt}"),
                    gap,
                    1e-9,
                );
                rep.push(
                    Scope::Sav,
                    format!("{tag} interior-root equality, {pname} dt={dt}"),
                    eq,
                    1e-9,
                );
                rep.push(
                    Scope::Sav,
                    format!("{tag} stored iterate, {pname} dt={dt}"),
                    it,
                    f64::EPSILON,
                );
            }
        }
    }
    rep.push(
        Scope::Sav,
        "savgd = modified sav(L=0) = rsavq(q=1/2), bitwise",
        collapse_mismatches(&rosen, vec![-3.0, -4.0], 1e-3, 1000).map(|m| m as f64),
        0.0,
    );
    let small = Rosenbrock::standard(6);
    let theta: Vec<f64> = (0..6).map(|i| 0.3 * i as f64 - 0.7).collect();
    for (name, op) in [
        ("L=0", LinearOperator::zero(6)),
        ("L=I", LinearOperator::scaled_identity(1.0, 6)),
        ("L=-Δ", LinearOperator::laplacian(1.0, 6)),
    ] {
        let res = op.and_then(|op| block_system_residual(&small, &op, &theta, 0.05));
        rep.push(
            Scope::Sav,
            format!("explicit update = block solve, {name}"),
            res,
            1e-10,
        );
    }
    let res = LinearOperator::scaled_identity(1.0, 6)
        .and_then(|op| legacy_block_residual(&small, &op, 10.0, &theta, 3.0, 0.05));
    rep.push(
        Scope::Sav,
        "split-scheme update = block solve, L=I",
        res,
        1e-10,
    );
}

fn check_problems(rep: &mut VerifyReport) {
    let quad = Quadratic::benchmark();
    rep.push(
        Scope::Problems,
        "quadratic: finite differences",
        Ok(finite_difference_error(
            &quad,
            &random_points(quad.dim(), 20, 1.0, 10),
            11,
        )),
        1e-5,
    );
    rep.push(
        Scope::Problems,
        "quadratic: quartic ray",
        quartic_ray_error(&quad, &random_points(quad.dim(), 5, 1.0, 12), 13),
        1e-9,
    );
    let hd = quad.hessian_operator();
    let v: Vec<f64> = (0..quad.dim()).map(|i| i as f64 - 3.0).collect();
    let hv = hd.apply(&v).map(|hv| {
        let g1 = quad.gradient(&v);
        hv.iter()
            .zip(&g1)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    });
    rep.push(
        Scope::Problems,
        "quadratic: diagonal Hessian operator",
        hv,
        0.0,
    );
    for n in [2, 10, 100] {
        let r = Rastrigin::new(n);
        rep.push(
            Scope::Problems,
            format!("rastrigin n={n}: f(1) = n"),
            Ok((r.value(&vec![1.0; n]) - n as f64).abs()),
            1e-9,
        );
        rep.push(
            Scope::Problems,
            format!("rastrigin n={n}: finite differences"),
            Ok(finite_difference_error(
                &r,
                &random_points(n, 20, 2.0, 14),
                15,
            )),
            1e-5,
        );
    }
    for n in [2, 10, 100] {
        let r = Rosenbrock::standard(n);
        let pts = random_points(n, 20, 1.0, 16);
        rep.push(
            Scope::Problems,
            format!("rosenbrock n={n}: finite differences"),
            Ok(finite_difference_error(&r, &pts, 17)),
            1e-5,
        );
        rep.push(
            Scope::Problems,
            format!("rosenbrock n={n}: quartic ray"),
            quartic_ray_error(&r, &pts[..5], 18),
            1e-9,
        );
        rep.push(
            Scope::Problems,
            format!("rosenbrock n={n}: f(0) = n a²"),
            Ok((r.value(&vec![0.0; n]) - if n == 2 { 1.0 } else { n as f64 }).abs()),
            0.0,
        );
    }
    match PhaseRetrieval::generate(&[16], 3, TruthKind::ComplexGaussian, 19) {
        Ok(pr) => {
            let pts: Vec<Vec<f64>> = (0..20).map(|i| pr.random_init(100 + i)).collect();
            rep.push(
                Scope::Problems,
                "phase retrieval: finite differences",
                Ok(finite_difference_error(&pr, &pts, 20)),
                1e-5,
            );
            rep.push(
                Scope::Problems,
                "phase retrieval: quartic ray",
                quartic_ray_error(&pr, &pts[..5], 21),
                1e-9,
            );
            let mut worst = 0.0_f64;
            for (i, p) in pts.iter().take(10).enumerate() {
                let z = ComplexVector::from_interleaved(p);
                let f0 = pr.eval_complex(&z);
                let f1 = pr.eval_complex(&z.rotate(0.37 + i as f64));
                worst = worst.max((f1 - f0).abs() / (1.0 + f0));
            }
            rep.push(
                Scope::Problems,
                "phase retrieval: global phase invariance",
                Ok(worst),
                1e-9,
            );
            rep.push(
                Scope::Problems,
                "phase retrieval: f(truth) = 0",
                Ok(pr.value(&pr.truth().to_interleaved())),
                1e-20,
            );
        }
        Err(e) => rep.push(
            Scope::Problems,
            "phase retrieval: construction",
            Err(e),
            0.0,
        ),
    }
    let spec = SynthSpec {
        users: 5,
        items: 7,
        rank: 3,
        ratings: 20,
        noise: 0.1,
        seed: 22,
    };
    match synth_ratings(&spec) {
        Ok(s) => {
            let p = s.problem.with_regularization(0.01, 0.02);
            let n = Objective::dim(&p);
            rep.push(
                Scope::Problems,
                "matrix factorization: finite differences",
                Ok(finite_difference_error(
                    &p,
                    &random_points(n, 20, 1.0, 23),
                    24,
                )),
                1e-5,
            );
        }
        Err(e) => rep.push(
            Scope::Problems,
            "matrix factorization: construction",
            Err(e),
            0.0,
        ),
    }
}

/// Run the checks of `scope`.
pub fn verify_suite(scope: Scope) -> VerifyReport {
    let mut rep = VerifyReport::default();
    if matches!(scope, Scope::Operators | Scope::All) {
        check_operators(&mut rep);
    }
    if matches!(scope, Scope::Sav | Scope::All) {
        check_sav(&mut rep);
    }
    if matches!(scope, Scope::Problems | Scope::All) {
        check_problems(&mut rep);
    }
    rep
}
