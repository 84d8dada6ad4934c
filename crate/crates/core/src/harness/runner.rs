//! Config-driven experiment runs.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::baselines::{adam_step, gd_step, nag_step, steepest_descent_step, AdamState, NagState};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::objective::{BatchObjective, MiniBatchObjective, NoisyGradient, Objective};
use crate::operators::{LinearOperator, OperatorKind};
use crate::problems::{
    load_ratings, synth_ratings, MatrixFactorization, PhaseRetrieval, Quadratic, Rastrigin,
    Rosenbrock, SeparablePolynomial, SynthSpec, TruthKind,
};
use crate::sav::{
    adaptive_rsav_step, legacy_sav_step, linesearch_sav_step, modified_sav_step, msav_step, pow_q,
    rsav_step, rsavq_step, savgd_step, AdaptiveParams, QParams, RelaxParams, SavState, StepReport,
    WolfeParams,
};

use super::config::{ExperimentConfig, Init, OptimizerConfig, OptimizerName, ProblemName};
use super::trace::{Status, TraceRecord};

/// Default size of the synthetic ratings problem.
pub const SYNTH_DEFAULTS: SynthSpec = SynthSpec {
    users: 200,
    items: 300,
    rank: 8,
    ratings: 6000,
    noise: 0.0,
    seed: 0,
};

/// Step size above which a run is flagged in its summary.
pub const LARGE_DT: f64 = 1e12;

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub problem: String,
    pub optimizer: String,
    pub lr: f64,
    /// Loss at the last finite record (full training loss for mini-batch runs).
    pub final_loss: f64,
    /// Steps completed.
    pub iterations: usize,
    pub status: Status,
    pub message: Option<String>,
    pub final_dt: Option<f64>,
    /// First iteration whose step size exceeded [`LARGE_DT`]; adaptive step
    /// sizes are not capped.
    pub large_dt_at: Option<usize>,
    /// Held-out MSE for matrix factorization.
    pub test_loss: Option<f64>,
    /// Mean batch loss per epoch for mini-batch runs.
    pub epoch_losses: Vec<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<TraceRecord>,
    pub summary: Summary,
    pub theta: Vec<f64>,
}

// Independent sub-streams derived from the configured seed.
const SEED_INIT: u64 = 0x1;
const SEED_NOISE: u64 = 0x2;
const SEED_BATCH: u64 = 0x3;

fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

enum Target {
    Full(Box<dyn Objective>),
    Batched(MiniBatchObjective<MatrixFactorization>),
}

impl Target {
    fn obj(&self) -> &dyn Objective {
        match self {
            Target::Full(o) => o.as_ref(),
            Target::Batched(b) => b,
        }
    }
}

/// Everything a run needs, built before any iteration.
struct Setup {
    target: Target,
    theta0: Vec<f64>,
    op: LinearOperator,
    mf: Option<MatrixFactorization>,
    steps: usize,
}

fn config_err(m: impl Into<String>) -> Error {
    Error::Config(m.into())
}

fn seed_of(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.problem
        .seed
        .ok_or_else(|| config_err("problem.seed is required"))
}

struct BuiltProblem {
    obj: Box<dyn Objective>,
    hessian_diag: Option<Vec<f64>>,
    domain: Option<(f64, f64)>,
    random_init: Option<Vec<f64>>,
    mf: Option<MatrixFactorization>,
}

fn build_problem(cfg: &ExperimentConfig) -> Result<BuiltProblem> {
    let p = &cfg.problem;
    let params = &p.params;
    let shift = |default: f64| p.shift.unwrap_or(default);
    let plain = |obj: Box<dyn Objective>| BuiltProblem {
        obj,
        hessian_diag: None,
        domain: None,
        random_init: None,
        mf: None,
    };
    Ok(match p.name {
        ProblemName::Quadratic => {
            let q = Quadratic::new(p.dimension.unwrap_or(100))?;
            let c0 = q.shift();
            let q = q.with_shift(shift(c0));
            let diag = q.hessian_diagonal();
            BuiltProblem {
                hessian_diag: Some(diag),
                ..plain(Box::new(q))
            }
        }
        ProblemName::Rastrigin => {
            let r = Rastrigin::new(p.dimension.unwrap_or(2));
            let c0 = r.shift();
            let r = r.with_shift(shift(c0));
            BuiltProblem {
                domain: Some(Rastrigin::DOMAIN),
                ..plain(Box::new(r))
            }
        }
        ProblemName::Rosenbrock => {
            let r = Rosenbrock::new(
                p.dimension.unwrap_or(2),
                params.a.unwrap_or(1.0),
                params.b.unwrap_or(100.0),
            )?;
            let c0 = r.shift();
            let r = r.with_shift(shift(c0));
            plain(Box::new(r))
        }
        ProblemName::Polynomial => {
            let coeffs = params
                .coeffs
                .ok_or_else(|| config_err("polynomial needs params.coeffs"))?;
            let s = SeparablePolynomial::new(coeffs, p.dimension.unwrap_or(1))
                .with_center(params.center.unwrap_or(0.0));
            let c0 = s.shift();
            let s = s.with_shift(shift(c0));
            plain(Box::new(s))
        }
        ProblemName::PhaseRetrieval => {
            let seed = seed_of(cfg)?;
            let shape = params.shape.clone().unwrap_or_else(|| vec![64]);
            let truth = params.truth.unwrap_or(TruthKind::RealUniform);
            let pr = PhaseRetrieval::generate(&shape, params.masks.unwrap_or(6), truth, seed)?;
            let c0 = pr.shift();
            let pr = pr.with_shift(shift(c0));
            let init = pr.random_init(sub_seed(seed, SEED_INIT));
            BuiltProblem {
                random_init: Some(init),
                ..plain(Box::new(pr))
            }
        }
        ProblemName::MatrixFactorization => {
            let seed = seed_of(cfg)?;
            let dim = params.embedding_dim.unwrap_or(8);
            let mf = match &params.ratings_file {
                Some(path) => load_ratings(path, dim, seed)?,
                None => {
                    let spec = SynthSpec {
                        users: params.users.unwrap_or(SYNTH_DEFAULTS.users),
                        items: params.items.unwrap_or(SYNTH_DEFAULTS.items),
                        rank: params.rank.unwrap_or(SYNTH_DEFAULTS.rank),
                        ratings: params.ratings.unwrap_or(SYNTH_DEFAULTS.ratings),
                        noise: params.rating_noise.unwrap_or(SYNTH_DEFAULTS.noise),
                        seed,
                    };
                    synth_ratings(&spec)?.problem.with_embedding_dim(dim)?
                }
            };
            let mf = mf.with_regularization(
                params.lambda_user.unwrap_or(1e-4),
                params.lambda_item.unwrap_or(1e-4),
            );
            let mf = match p.shift {
                Some(c) => mf.with_shift(c),
                None => mf,
            };
            let init = mf.random_init(params.init_scale.unwrap_or(0.1), sub_seed(seed, SEED_INIT));
            BuiltProblem {
                random_init: Some(init),
                mf: Some(mf.clone()),
                ..plain(Box::new(mf))
            }
        }
    })
}

fn initial_point(cfg: &ExperimentConfig, built: &BuiltProblem) -> Result<Vec<f64>> {
    let n = built.obj.dim();
    let uniform = |lo: f64, hi: f64| -> Result<Vec<f64>> {
        if !(lo < hi) {
            return Err(config_err(format!(
                "init box needs lo < hi, got [{lo}, {hi}]"
            )));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed_of(cfg)?, SEED_INIT));
        Ok((0..n).map(|_| rng.random_range(lo..hi)).collect())
    };
    match &cfg.problem.init {
        Init::Vector(v) => {
            if v.len() != n {
                return Err(config_err(format!(
                    "init vector has length {}, problem dimension is {n}",
                    v.len()
                )));
            }
            Ok(v.clone())
        }
        Init::Box { r#box: [lo, hi] } => uniform(*lo, *hi),
        Init::Preset(name) => {
            match name.as_str() {
                "ones" => Ok(vec![1.0; n]),
                "zeros" => Ok(vec![0.0; n]),
                "rosenbrock-2d-start" if n == 2 => Ok(vec![-3.0, -4.0]),
                "rosenbrock-2d-start" => Err(config_err("rosenbrock-2d-start needs dimension 2")),
                "box-random" => {
                    let (lo, hi) = built
                    .domain
                    .ok_or_else(|| config_err("box-random needs a problem with a domain; use init = { box = [lo, hi] }"))?;
                    uniform(lo, hi)
                }
                "random" => match &built.random_init {
                    Some(v) => Ok(v.clone()),
                    None => {
                        let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed_of(cfg)?, SEED_INIT));
                        Ok((0..n).map(|_| rng.sample(StandardNormal)).collect())
                    }
                },
                other => Err(config_err(format!("unknown init preset {other:?}"))),
            }
        }
    }
}

fn build_operator(cfg: &ExperimentConfig, built: &BuiltProblem) -> Result<LinearOperator> {
    let n = built.obj.dim();
    let o = &cfg.operator;
    match o.kind {
        OperatorKind::Zero => LinearOperator::zero(n),
        OperatorKind::ScaledIdentity => LinearOperator::scaled_identity(o.lambda, n),
        OperatorKind::Diagonal => {
            let e = o
                .entries
                .clone()
                .ok_or_else(|| config_err("diagonal operator needs entries"))?;
            if e.len() != n {
                return Err(config_err(format!(
                    "diagonal has {} entries, problem dimension is {n}",
                    e.len()
                )));
            }
            LinearOperator::diagonal(e)
        }
        OperatorKind::HessianDiagonal => {
            let d = built.hessian_diag.clone().ok_or_else(|| {
                config_err("hessian_diagonal is only available for the quadratic problem")
            })?;
            LinearOperator::diagonal(d)
        }
        OperatorKind::Laplacian => LinearOperator::laplacian(o.sigma, n),
        OperatorKind::Composite => LinearOperator::composite(o.lambda, o.sigma, n),
    }
}

fn setup(cfg: &ExperimentConfig, opt: &OptimizerConfig) -> Result<Setup> {
    cfg.validate()?;
    let built = build_problem(cfg)?;
    let theta0 = initial_point(cfg, &built)?;
    let op = build_operator(cfg, &built).map_err(|e| config_err(e.to_string()))?;
    if opt.name == OptimizerName::Sd
        && built
            .obj
            .quartic_ray(&theta0, &vec![0.0; theta0.len()])
            .is_none()
    {
        return Err(config_err(
            "sd needs an objective with an exact quartic ray",
        ));
    }
    let mf = built.mf.clone();
    let (target, steps) = match cfg.batch {
        Some(b) => {
            if cfg.noise > 0.0 {
                return Err(config_err(
                    "gradient noise is not supported with mini-batches",
                ));
            }
            let full = built
                .mf
                .clone()
                .ok_or_else(|| config_err("mini-batching needs matrix_factorization"))?;
            let mb = MiniBatchObjective::new(full, b.size, sub_seed(seed_of(cfg)?, SEED_BATCH))?;
            let steps = b.epochs * mb.batches_per_epoch();
            (Target::Batched(mb), steps)
        }
        None if cfg.noise > 0.0 => {
            let noisy =
                NoisyGradient::new(built.obj, cfg.noise, sub_seed(seed_of(cfg)?, SEED_NOISE))?;
            (Target::Full(Box::new(noisy)), cfg.iterations)
        }
        None => (Target::Full(built.obj), cfg.iterations),
    };
    Ok(Setup {
        target,
        theta0,
        op,
        mf,
        steps,
    })
}

/// Optimizer parameters resolved from the config with defaults.
#[derive(Debug, Clone, Copy)]
struct Resolved {
    name: OptimizerName,
    lr: f64,
    relax: RelaxParams,
    adapt: AdaptiveParams,
    qp: QParams,
    wolfe: Option<WolfeParams>,
    c_g: f64,
    momentum: f64,
    betas: (f64, f64, f64),
}

fn resolve(o: &OptimizerConfig) -> Result<Resolved> {
    let relax = RelaxParams::new(o.eta.unwrap_or(0.99))?;
    let d = AdaptiveParams::default();
    let adapt = AdaptiveParams {
        dt_min: o.dt_min.unwrap_or(d.dt_min.min(o.lr)),
        rho: o.rho.unwrap_or(d.rho),
        gamma: o.gamma.unwrap_or(d.gamma),
    };
    if o.name == OptimizerName::AdaptiveRsav {
        adapt.validate(o.lr)?;
    }
    let restart_default = o.name == OptimizerName::LinesearchSav;
    let qp = QParams::new(o.q.unwrap_or(0.5), o.restart.unwrap_or(restart_default))?;
    let wolfe = o
        .wolfe
        .map(|[c1, c2]| WolfeParams::new(c1, c2))
        .transpose()?;
    Ok(Resolved {
        name: o.name,
        lr: o.lr,
        relax,
        adapt,
        qp,
        wolfe,
        c_g: o.c_g.unwrap_or(1.0),
        momentum: o.momentum.unwrap_or(0.9),
        betas: (
            o.beta1.unwrap_or(0.9),
            o.beta2.unwrap_or(0.999),
            o.eps.unwrap_or(1e-8),
        ),
    })
}

enum Method {
    Gd(Vec<f64>),
    Sd(Vec<f64>),
    Nag(NagState),
    Adam(AdamState),
    Sav(SavState),
}

impl Method {
    fn theta(&self) -> &[f64] {
        match self {
            Method::Gd(t) | Method::Sd(t) => t,
            Method::Nag(s) => &s.theta,
            Method::Adam(s) => &s.theta,
            Method::Sav(s) => &s.theta,
        }
    }

    fn r(&self) -> Option<f64> {
        match self {
            Method::Sav(s) => Some(s.r),
            _ => None,
        }
    }
}

fn start(p: &Resolved, obj: &dyn Objective, theta: Vec<f64>) -> Result<Method> {
    Ok(match p.name {
        OptimizerName::Gd => Method::Gd(theta),
        OptimizerName::Sd => Method::Sd(theta),
        OptimizerName::Nag => {
            let mut s = NagState::new(theta, p.lr);
            s.gamma = p.momentum;
            Method::Nag(s)
        }
        OptimizerName::Adam => {
            let mut s = AdamState::new(theta, p.lr);
            (s.beta1, s.beta2, s.eps) = p.betas;
            Method::Adam(s)
        }
        OptimizerName::LegacySav => {
            let f = crate::objective::eval(obj, &theta)?;
            // r_0 = √(g(θ_0) + C_g) is set by the first restart below.
            Method::Sav(SavState {
                r: (f + p.c_g).max(0.0).sqrt(),
                theta,
                dt: p.lr,
                k: 0,
            })
        }
        OptimizerName::Rsavq | OptimizerName::LinesearchSav => {
            Method::Sav(SavState::with_exponent(obj, theta, p.lr, p.qp.q)?)
        }
        _ => Method::Sav(SavState::new(obj, theta, p.lr)?),
    })
}

/// Re-anchor the auxiliary variable to the current (batch) energy.
fn restart_r(m: &mut Method, p: &Resolved, obj: &dyn Objective, op: &LinearOperator) -> Result<()> {
    if let Method::Sav(s) = m {
        let fc = crate::objective::shifted_value(obj, &s.theta)?;
        s.r = match p.name {
            OptimizerName::Rsavq | OptimizerName::LinesearchSav => pow_q(fc, p.qp.q),
            OptimizerName::LegacySav => legacy_energy(obj, op, &s.theta, p.c_g)?.sqrt(),
            _ => fc.sqrt(),
        };
    }
    Ok(())
}

fn legacy_energy(obj: &dyn Objective, op: &LinearOperator, theta: &[f64], c_g: f64) -> Result<f64> {
    use crate::operators::Operator;
    let f = crate::objective::eval(obj, theta)?;
    let lt = op.apply(theta)?;
    let gc = f - 0.5 * crate::linalg::dot(&lt, theta) + c_g;
    if !(gc > 0.0) {
        return Err(Error::SplittingBoundViolated(gc));
    }
    Ok(gc)
}

fn advance(
    m: &mut Method,
    p: &Resolved,
    obj: &dyn Objective,
    op: &LinearOperator,
) -> Result<StepReport> {
    let plain = |dt: f64, alpha: f64| StepReport {
        dt,
        alpha,
        ..Default::default()
    };
    Ok(match m {
        Method::Gd(theta) => {
            *theta = gd_step(theta, obj, op, p.lr)?;
            plain(p.lr, p.lr)
        }
        Method::Sd(theta) => {
            let (next, alpha) = steepest_descent_step(theta, obj)?;
            *theta = next;
            plain(p.lr, alpha)
        }
        Method::Nag(s) => {
            *s = nag_step(s, obj)?;
            plain(p.lr, p.lr)
        }
        Method::Adam(s) => {
            *s = adam_step(s, obj)?;
            plain(p.lr, p.lr)
        }
        Method::Sav(s) => {
            let (next, rep) = match p.name {
                OptimizerName::Sav => modified_sav_step(s, obj, op, p.lr)?,
                OptimizerName::Savgd => savgd_step(s, obj, p.lr)?,
                OptimizerName::Msav => msav_step(s, obj, op, p.lr)?,
                OptimizerName::LegacySav => legacy_sav_step(s, obj, op, p.c_g, p.lr)?,
                OptimizerName::Rsav => rsav_step(s, obj, op, &p.relax, p.lr)?,
                OptimizerName::AdaptiveRsav => adaptive_rsav_step(s, obj, op, &p.relax, &p.adapt)?,
                OptimizerName::Rsavq => rsavq_step(s, obj, op, &p.qp, p.lr)?,
                OptimizerName::LinesearchSav => {
                    linesearch_sav_step(s, obj, op, &p.qp, p.lr, p.wolfe.as_ref())?
                }
                _ => unreachable!("baseline handled above"),
            };
            *s = next;
            rep
        }
    })
}

fn finite_or_none(x: f64) -> Option<f64> {
    Some(x).filter(|v| !v.is_nan())
}

/// Run one experiment with the config's `[optimizer]`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunOutput> {
    let opt = cfg
        .optimizer
        .clone()
        .ok_or_else(|| config_err("[optimizer] is required for run"))?;
    run_with(cfg, &opt)
}

/// Run one experiment with an explicit optimizer (used by `compare`).
pub fn run_with(cfg: &ExperimentConfig, opt: &OptimizerConfig) -> Result<RunOutput> {
    let p = resolve(opt).map_err(|e| config_err(e.to_string()))?;
    let mut setup = setup(cfg, opt)?;
    let clock = Instant::now();
    let shift = setup.target.obj().shift();
    let mut records = Vec::with_capacity(setup.steps + 1);
    let mut status = Status::Ok;
    let mut message = None;
    let mut epoch_sums: Vec<(f64, usize)> = Vec::new();
    let mut last_finite = f64::NAN;
    let mut large_dt_at = None;

    let mut method = match start(&p, setup.target.obj(), setup.theta0.clone()) {
        Ok(m) => m,
        Err(e) => return Err(config_err(format!("initial point: {e}"))),
    };
    let legacy = p.name == OptimizerName::LegacySav;
    if legacy {
        restart_r(&mut method, &p, setup.target.obj(), &setup.op)?;
    }

    let mut k = 0;
    loop {
        let batched = matches!(setup.target, Target::Batched(_));
        let is_final = k == setup.steps;
        if batched && k > 0 && !is_final {
            if let Target::Batched(b) = &mut setup.target {
                b.advance();
            }
        }
        let obj = setup.target.obj();
        let theta = method.theta().to_vec();
        let f = match (&setup.target, is_final) {
            (Target::Batched(b), true) => b.full().batch_value(&theta, None).unwrap_or(f64::NAN),
            _ => obj.value(&theta),
        };
        let mut rec = TraceRecord {
            k,
            f,
            ..Default::default()
        };
        if !f.is_finite() {
            rec.status = Status::Diverge;
            status = Status::Diverge;
            message = Some(format!("objective value {f} at iteration {k}"));
            records.push(rec);
            break;
        }
        last_finite = f;
        if batched && !is_final {
            if let Err(e) = restart_r(&mut method, &p, obj, &setup.op) {
                rec.status = if e.is_divergence() {
                    Status::Diverge
                } else {
                    Status::Error
                };
                status = rec.status;
                message = Some(e.to_string());
                records.push(rec);
                break;
            }
        }
        let g = obj.exact_gradient(&theta);
        rec.grad_norm = finite_or_none(norm(&g));
        if is_final {
            rec.r = method.r();
            if let (Some(r), true) = (rec.r, opt.name.is_sav()) {
                rec.indicator = Some(
                    r / if legacy {
                        legacy_energy(obj, &setup.op, &theta, p.c_g)
                            .unwrap_or(f64::NAN)
                            .sqrt()
                    } else {
                        (f + shift).sqrt()
                    },
                );
            }
            if let Method::Sav(s) = &method {
                rec.dt = Some(s.dt);
            }
            records.push(rec);
            break;
        }
        if let Target::Batched(b) = &setup.target {
            let e = b.epoch();
            if epoch_sums.len() < e {
                epoch_sums.resize(e, (0.0, 0));
            }
            epoch_sums[e - 1].0 += f;
            epoch_sums[e - 1].1 += 1;
        }
        match advance(&mut method, &p, obj, &setup.op) {
            Ok(rep) => {
                if opt.name.is_sav() {
                    rec.r = Some(rep.r);
                    rec.indicator = Some(rep.indicator);
                }
                rec.r_tilde = rep.r_tilde;
                rec.xi = rep.xi;
                rec.dt = Some(rep.dt);
                rec.alpha = Some(rep.alpha);
                if rep.dt > LARGE_DT && large_dt_at.is_none() {
                    large_dt_at = Some(k);
                }
                records.push(rec);
            }
            Err(e) => {
                rec.status = if e.is_divergence() {
                    Status::Diverge
                } else {
                    Status::Error
                };
                rec.r = method.r();
                status = rec.status;
                message = Some(format!("iteration {k}: {e}"));
                records.push(rec);
                break;
            }
        }
        k += 1;
    }

    let theta = method.theta().to_vec();
    let test_loss = match (&setup.mf, status) {
        (Some(mf), Status::Ok) => mf.test_loss(&theta).ok(),
        _ => None,
    };
    let final_dt = match &method {
        Method::Sav(s) => Some(s.dt),
        _ => None,
    };
    let summary = Summary {
        problem: cfg.problem.name.as_str().to_string(),
        optimizer: opt.name.as_str().to_string(),
        lr: opt.lr,
        final_loss: last_finite,
        iterations: records.len().saturating_sub(1),
        status,
        message,
        final_dt,
        large_dt_at,
        test_loss,
        epoch_losses: epoch_sums.iter().map(|(s, n)| s / *n as f64).collect(),
        wall_time_s: clock.elapsed().as_secs_f64(),
    };
    Ok(RunOutput {
        records,
        summary,
        theta,
    })
}
