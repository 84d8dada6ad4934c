//! Objective abstraction plus the noisy-gradient and mini-batch wrappers.

use std::cell::Cell;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::linalg::all_finite;

/// Coefficients `(c0, .., c4)` of `φ(α) = f(θ + α d) = Σ c_j α^j`.
pub type Quartic = [f64; 5];

/// Evaluate a quartic by Horner's rule.
pub fn quartic_value(c: &Quartic, alpha: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, cj| acc * alpha + cj)
}

/// A differentiable cost bounded below by `-shift()`.
pub trait Objective {
    fn dim(&self) -> usize;

    fn value(&self, theta: &[f64]) -> f64;

    fn gradient(&self, theta: &[f64]) -> Vec<f64>;

    /// The constant `C` with `f(θ) + C > 0`.
    fn shift(&self) -> f64;

    /// Exact ray polynomial for objectives that are quartic along rays.
    fn quartic_ray(&self, _theta: &[f64], _dir: &[f64]) -> Option<Quartic> {
        None
    }

    /// Gradient without side effects on any internal generator; used for
    /// diagnostics such as the trace gradient norm.
    fn exact_gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.gradient(theta)
    }
}

impl<O: Objective + ?Sized> Objective for Box<O> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        (**self).value(theta)
    }
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (**self).gradient(theta)
    }
    fn shift(&self) -> f64 {
        (**self).shift()
    }
    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        (**self).quartic_ray(theta, dir)
    }
    fn exact_gradient(&self, theta: &[f64]) -> Vec<f64> {
        (**self).exact_gradient(theta)
    }
}

impl<O: Objective + ?Sized> Objective for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        (**self).value(theta)
    }
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        (**self).gradient(theta)
    }
    fn shift(&self) -> f64 {
        (**self).shift()
    }
    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        (**self).quartic_ray(theta, dir)
    }
    fn exact_gradient(&self, theta: &[f64]) -> Vec<f64> {
        (**self).exact_gradient(theta)
    }
}

fn check_point<O: Objective + ?Sized>(obj: &O, theta: &[f64]) -> Result<()> {
    check_dim(obj.dim(), theta.len())?;
    if !all_finite(theta) {
        return Err(Error::Diverged("non-finite parameters".into()));
    }
    Ok(())
}

/// `f(θ)`, with non-finite values reported as divergence.
pub fn eval<O: Objective + ?Sized>(obj: &O, theta: &[f64]) -> Result<f64> {
    check_point(obj, theta)?;
    let f = obj.value(theta);
    if !f.is_finite() {
        return Err(Error::Diverged(format!("objective value {f}")));
    }
    Ok(f)
}

/// `∇f(θ)`, with non-finite entries reported as divergence.
pub fn grad<O: Objective + ?Sized>(obj: &O, theta: &[f64]) -> Result<Vec<f64>> {
    check_point(obj, theta)?;
    let g = obj.gradient(theta);
    if !all_finite(&g) {
        return Err(Error::Diverged("non-finite gradient".into()));
    }
    Ok(g)
}

/// `f(θ) + C`, rejecting non-positive values.
pub fn shifted_value<O: Objective + ?Sized>(obj: &O, theta: &[f64]) -> Result<f64> {
    let fc = eval(obj, theta)? + obj.shift();
    if fc <= 0.0 {
        return Err(Error::ShiftViolated(fc));
    }
    Ok(fc)
}

pub fn directional_quartic<O: Objective + ?Sized>(
    obj: &O,
    theta: &[f64],
    dir: &[f64],
) -> Result<Quartic> {
    check_point(obj, theta)?;
    check_dim(obj.dim(), dir.len())?;
    let c = obj
        .quartic_ray(theta, dir)
        .ok_or(Error::Unsupported("quartic ray expansion"))?;
    if !c.iter().all(|x| x.is_finite()) {
        return Err(Error::Diverged("non-finite ray coefficients".into()));
    }
    Ok(c)
}

/// Gradient perturbed by `ε N(0, I)`.
///
/// Noise for the `i`-th gradient call is drawn from a ChaCha8 stream keyed by
/// `(seed, i)` using the ziggurat standard-normal sampler of `rand_distr`, so
/// any call is reproducible from its index alone. The objective value is
/// never perturbed.
#[derive(Debug)]
pub struct NoisyGradient<O> {
    base: O,
    epsilon: f64,
    seed: u64,
    calls: Cell<u64>,
}

impl<O: Objective> NoisyGradient<O> {
    pub fn new(base: O, epsilon: f64, seed: u64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise level must be >= 0, got {epsilon}"
            )));
        }
        Ok(Self {
            base,
            epsilon,
            seed,
            calls: Cell::new(0),
        })
    }

    pub fn base(&self) -> &O {
        &self.base
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of noisy gradient calls made so far.
    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    /// The standard normal vector used at call `index`.
    pub fn noise(&self, index: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index);
        (0..self.base.dim())
            .map(|_| rng.sample(StandardNormal))
            .collect()
    }

    /// Noisy gradient for an explicit call index; does not advance the counter.
    pub fn noisy_grad_at(&self, theta: &[f64], index: u64) -> Vec<f64> {
        let mut g = self.base.gradient(theta);
        if self.epsilon == 0.0 {
            return g;
        }
        for (gi, zi) in g.iter_mut().zip(self.noise(index)) {
            *gi += self.epsilon * zi;
        }
        g
    }
}

impl<O: Objective> Objective for NoisyGradient<O> {
    fn dim(&self) -> usize {
        self.base.dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        self.base.value(theta)
    }
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        let index = self.calls.get();
        self.calls.set(index + 1);
        self.noisy_grad_at(theta, index)
    }
    fn shift(&self) -> f64 {
        self.base.shift()
    }
    fn quartic_ray(&self, theta: &[f64], dir: &[f64]) -> Option<Quartic> {
        self.base.quartic_ray(theta, dir)
    }
    fn exact_gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.base.gradient(theta)
    }
}

/// Objectives defined as an average over samples.
pub trait BatchObjective {
    fn dim(&self) -> usize;
    fn sample_count(&self) -> usize;
    fn shift(&self) -> f64;
    fn batch_value(&self, theta: &[f64], batch: Option<&[usize]>) -> Result<f64>;
    fn batch_gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> Result<Vec<f64>>;
}

/// Epoch-wise shuffler that partitions `0..n` into consecutive batches.
#[derive(Debug, Clone)]
pub struct BatchSampler {
    n: usize,
    batch_size: usize,
    rng: ChaCha8Rng,
    order: Vec<usize>,
    cursor: usize,
    epoch: usize,
}

impl BatchSampler {
    pub fn new(n: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 {
            return Err(Error::InvalidParameter(
                "batch size must be positive".into(),
            ));
        }
        if n == 0 {
            return Err(Error::EmptyBatch);
        }
        Ok(Self {
            n,
            batch_size,
            rng: ChaCha8Rng::seed_from_u64(seed),
            order: Vec::new(),
            cursor: n,
            epoch: 0,
        })
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.n.div_ceil(self.batch_size)
    }

    /// Completed-or-current epoch counter (1 after the first batch is drawn).
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    /// Next batch without replacement; reshuffles at epoch boundaries.
    /// Returns the batch and whether it starts a new epoch.
    pub fn next_batch(&mut self) -> (Vec<usize>, bool) {
        let mut new_epoch = false;
        if self.cursor >= self.n {
            self.order = (0..self.n).collect();
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
            self.epoch += 1;
            new_epoch = true;
        }
        let end = (self.cursor + self.batch_size).min(self.n);
        let batch = self.order[self.cursor..end].to_vec();
        self.cursor = end;
        (batch, new_epoch)
    }
}

/// A [`BatchObjective`] restricted to the currently active mini-batch.
#[derive(Debug)]
pub struct MiniBatchObjective<P> {
    full: P,
    sampler: BatchSampler,
    batch: Vec<usize>,
}

impl<P: BatchObjective> MiniBatchObjective<P> {
    pub fn new(full: P, batch_size: usize, seed: u64) -> Result<Self> {
        let mut sampler = BatchSampler::new(full.sample_count(), batch_size, seed)?;
        let (batch, _) = sampler.next_batch();
        Ok(Self {
            full,
            sampler,
            batch,
        })
    }

    pub fn full(&self) -> &P {
        &self.full
    }

    pub fn batch(&self) -> &[usize] {
        &self.batch
    }

    pub fn epoch(&self) -> usize {
        self.sampler.epoch()
    }

    pub fn batches_per_epoch(&self) -> usize {
        self.sampler.batches_per_epoch()
    }

    /// Activate the next batch; returns true when it opens a new epoch.
    pub fn advance(&mut self) -> bool {
        let (batch, new_epoch) = self.sampler.next_batch();
        self.batch = batch;
        new_epoch
    }
}

impl<P: BatchObjective> Objective for MiniBatchObjective<P> {
    fn dim(&self) -> usize {
        self.full.dim()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        self.full
            .batch_value(theta, Some(&self.batch))
            .unwrap_or(f64::NAN)
    }
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.full
            .batch_gradient(theta, Some(&self.batch))
            .unwrap_or_else(|_| vec![f64::NAN; self.full.dim()])
    }
    fn shift(&self) -> f64 {
        self.full.shift()
    }
}
