//! Matrix factorization recommender.
//!
//! `f(X, Y) = (1/|B|) Σ_{(u,i)∈B} (R_ui - X_u·Y_i)² + λ_u Σ‖X_u‖² + λ_i Σ‖Y_i‖²`
//! where `B` is the full training set or a mini-batch of it. Parameters are
//! laid out as `X` (users × d, row-major) followed by `Y` (items × d).

use std::collections::HashMap;
use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_dim, Error, Result};
use crate::objective::{BatchObjective, Objective};

use super::analytic::DEFAULT_SHIFT;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub user: usize,
    pub item: usize,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub struct MatrixFactorization {
    users: usize,
    items: usize,
    dim: usize,
    lambda_user: f64,
    lambda_item: f64,
    train: Vec<Rating>,
    test: Vec<Rating>,
    shift: f64,
}

/// Parameters for the synthetic generator.
#[derive(Debug, Clone)]
pub struct SynthSpec {
    pub users: usize,
    pub items: usize,
    /// Rank of the generating factors.
    pub rank: usize,
    /// Number of observed (user, item) pairs.
    pub ratings: usize,
    /// Standard deviation of additive Gaussian rating noise.
    pub noise: f64,
    pub seed: u64,
}

/// Output of [`synth_ratings`]: the problem plus the factors that generated it.
#[derive(Debug, Clone)]
pub struct Synthetic {
    pub problem: MatrixFactorization,
    pub factors: Vec<f64>,
}

/// Fraction of ratings assigned to the training set.
pub const TRAIN_FRACTION: (usize, usize) = (4, 5);

fn split(mut all: Vec<Rating>, seed: u64) -> (Vec<Rating>, Vec<Rating>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    all.shuffle(&mut rng);
    let n_train = all.len() * TRAIN_FRACTION.0 / TRAIN_FRACTION.1;
    let test = all.split_off(n_train);
    (all, test)
}

impl MatrixFactorization {
    pub fn new(
        users: usize,
        items: usize,
        dim: usize,
        train: Vec<Rating>,
        test: Vec<Rating>,
    ) -> Result<Self> {
        if users == 0 || items == 0 || dim == 0 {
            return Err(Error::InvalidParameter(
                "users, items and embedding dimension must be positive".into(),
            ));
        }
        for r in train.iter().chain(&test) {
            if r.user >= users || r.item >= items {
                return Err(Error::InvalidParameter(format!(
                    "rating ({}, {}) out of range",
                    r.user, r.item
                )));
            }
        }
        Ok(Self {
            users,
            items,
            dim,
            lambda_user: 1e-4,
            lambda_item: 1e-4,
            train,
            test,
            shift: DEFAULT_SHIFT,
        })
    }

    pub fn with_regularization(mut self, lambda_user: f64, lambda_item: f64) -> Self {
        self.lambda_user = lambda_user;
        self.lambda_item = lambda_item;
        self
    }

    pub fn with_shift(mut self, c: f64) -> Self {
        self.shift = c;
        self
    }

    /// Change the embedding dimension (the ratings are unaffected).
    pub fn with_embedding_dim(mut self, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "embedding dimension must be positive".into(),
            ));
        }
        self.dim = dim;
        Ok(self)
    }

    pub fn users(&self) -> usize {
        self.users
    }

    pub fn items(&self) -> usize {
        self.items
    }

    pub fn embedding_dim(&self) -> usize {
        self.dim
    }

    pub fn train(&self) -> &[Rating] {
        &self.train
    }

    pub fn test(&self) -> &[Rating] {
        &self.test
    }

    /// Small Gaussian initial embeddings (standard deviation `scale`).
    pub fn random_init(&self, scale: f64, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..self.param_len())
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    fn param_len(&self) -> usize {
        (self.users + self.items) * self.dim
    }

    fn user_row<'a>(&self, theta: &'a [f64], u: usize) -> &'a [f64] {
        &theta[u * self.dim..(u + 1) * self.dim]
    }

    fn item_offset(&self, i: usize) -> usize {
        (self.users + i) * self.dim
    }

    fn item_row<'a>(&self, theta: &'a [f64], i: usize) -> &'a [f64] {
        let o = self.item_offset(i);
        &theta[o..o + self.dim]
    }

    fn regularization(&self, theta: &[f64]) -> f64 {
        let split = self.users * self.dim;
        let xu: f64 = theta[..split].iter().map(|x| x * x).sum();
        let yi: f64 = theta[split..].iter().map(|y| y * y).sum();
        self.lambda_user * xu + self.lambda_item * yi
    }

    fn predict(&self, theta: &[f64], r: &Rating) -> f64 {
        self.user_row(theta, r.user)
            .iter()
            .zip(self.item_row(theta, r.item))
            .map(|(x, y)| x * y)
            .sum()
    }

    fn select<'a>(&'a self, batch: Option<&'a [usize]>) -> Result<Vec<&'a Rating>> {
        match batch {
            None => {
                if self.train.is_empty() {
                    return Err(Error::EmptyBatch);
                }
                Ok(self.train.iter().collect())
            }
            Some([]) => Err(Error::EmptyBatch),
            Some(idx) => idx
                .iter()
                .map(|&k| {
                    self.train.get(k).ok_or_else(|| {
                        Error::InvalidParameter(format!("batch index {k} out of range"))
                    })
                })
                .collect(),
        }
    }

    /// Mean squared error on the held-out ratings.
    pub fn test_loss(&self, theta: &[f64]) -> Result<f64> {
        check_dim(self.param_len(), theta.len())?;
        if self.test.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let sse: f64 = self
            .test
            .iter()
            .map(|r| (r.value - self.predict(theta, r)).powi(2))
            .sum();
        Ok(sse / self.test.len() as f64)
    }
}

/// Loss over a batch (or the full training set when `batch` is `None`).
pub fn mf_eval(p: &MatrixFactorization, theta: &[f64], batch: Option<&[usize]>) -> Result<f64> {
    check_dim(p.param_len(), theta.len())?;
    let sel = p.select(batch)?;
    let sse: f64 = sel
        .iter()
        .map(|r| (r.value - p.predict(theta, r)).powi(2))
        .sum();
    Ok(sse / sel.len() as f64 + p.regularization(theta))
}

pub fn mf_grad(
    p: &MatrixFactorization,
    theta: &[f64],
    batch: Option<&[usize]>,
) -> Result<Vec<f64>> {
    check_dim(p.param_len(), theta.len())?;
    let sel = p.select(batch)?;
    let split = p.users * p.dim;
    let mut g: Vec<f64> = theta
        .iter()
        .enumerate()
        .map(|(k, t)| {
            2.0 * if k < split {
                p.lambda_user
            } else {
                p.lambda_item
            } * t
        })
        .collect();
    let scale = 2.0 / sel.len() as f64;
    for r in sel {
        let e = r.value - p.predict(theta, r);
        let uo = r.user * p.dim;
        let io = p.item_offset(r.item);
        for k in 0..p.dim {
            let x = theta[uo + k];
            let y = theta[io + k];
            g[uo + k] -= scale * e * y;
            g[io + k] -= scale * e * x;
        }
    }
    Ok(g)
}

impl BatchObjective for MatrixFactorization {
    fn dim(&self) -> usize {
        self.param_len()
    }
    fn sample_count(&self) -> usize {
        self.train.len()
    }
    fn shift(&self) -> f64 {
        self.shift
    }
    fn batch_value(&self, theta: &[f64], batch: Option<&[usize]>) -> Result<f64> {
        mf_eval(self, theta, batch)
    }
    fn batch_gradient(&self, theta: &[f64], batch: Option<&[usize]>) -> Result<Vec<f64>> {
        mf_grad(self, theta, batch)
    }
}

impl Objective for MatrixFactorization {
    fn dim(&self) -> usize {
        self.param_len()
    }
    fn value(&self, theta: &[f64]) -> f64 {
        mf_eval(self, theta, None).unwrap_or(f64::NAN)
    }
    fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        mf_grad(self, theta, None).unwrap_or_else(|_| vec![f64::NAN; self.param_len()])
    }
    fn shift(&self) -> f64 {
        self.shift
    }
}

/// Parse `user item rating [timestamp]` rows (tab or whitespace separated,
/// 1-based ids), remap ids densely in order of first appearance and split
/// 80/20 with a seeded shuffle.
pub fn load_ratings(path: &Path, dim: usize, seed: u64) -> Result<MatrixFactorization> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parse_err = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };

    let mut users: HashMap<u64, usize> = HashMap::new();
    let mut items: HashMap<u64, usize> = HashMap::new();
    let mut all = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let raw = raw.trim();
        if raw.is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split_whitespace().collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(parse_err(
                line,
                format!("expected 3 or 4 fields, found {}", fields.len()),
            ));
        }
        let id = |s: &str, what: &str| -> Result<u64> {
            match s.parse::<u64>() {
                Ok(v) if v >= 1 => Ok(v),
                _ => Err(parse_err(line, format!("bad {what} id {s:?}"))),
            }
        };
        let u = id(fields[0], "user")?;
        let i = id(fields[1], "item")?;
        let value: f64 = fields[2]
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(line, format!("bad rating {:?}", fields[2])))?;
        if let Some(ts) = fields.get(3) {
            ts.parse::<i64>()
                .map_err(|_| parse_err(line, format!("bad timestamp {ts:?}")))?;
        }
        let nu = users.len();
        let user = *users.entry(u).or_insert(nu);
        let ni = items.len();
        let item = *items.entry(i).or_insert(ni);
        all.push(Rating { user, item, value });
    }
    if all.is_empty() {
        return Err(parse_err(0, "no ratings".into()));
    }
    let (train, test) = split(all, seed);
    MatrixFactorization::new(users.len(), items.len(), dim, train, test)
}

/// Low-rank synthetic ratings `R_ui = X*_u·Y*_i + noise` on MovieLens-like
/// scale: factor entries are uniform in `[0, s)` with `s = 2√(3.5/rank)`, so
/// the mean rating is about 3.5.
pub fn synth_ratings(spec: &SynthSpec) -> Result<Synthetic> {
    if spec.users == 0 || spec.items == 0 || spec.rank == 0 {
        return Err(Error::InvalidParameter(
            "users, items and rank must be positive".into(),
        ));
    }
    if spec.ratings == 0 || spec.ratings > spec.users * spec.items {
        return Err(Error::InvalidParameter(format!(
            "ratings must be in 1..={}, got {}",
            spec.users * spec.items,
            spec.ratings
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let s = 2.0 * (3.5 / spec.rank as f64).sqrt();
    let factors: Vec<f64> = (0..(spec.users + spec.items) * spec.rank)
        .map(|_| s * rng.random::<f64>())
        .collect();

    let mut seen = HashSet::with_capacity(spec.ratings);
    let mut all = Vec::with_capacity(spec.ratings);
    while all.len() < spec.ratings {
        let user = rng.random_range(0..spec.users);
        let item = rng.random_range(0..spec.items);
        if !seen.insert((user, item)) {
            continue;
        }
        let x = &factors[user * spec.rank..(user + 1) * spec.rank];
        let yo = (spec.users + item) * spec.rank;
        let y = &factors[yo..yo + spec.rank];
        let mut value: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        if spec.noise > 0.0 {
            value += spec.noise * rng.sample::<f64, _>(StandardNormal);
        }
        all.push(Rating { user, item, value });
    }
    let (train, test) = split(all, spec.seed ^ 0x5eed_0f_5011_u64);
    let problem = MatrixFactorization::new(spec.users, spec.items, spec.rank, train, test)?;
    Ok(Synthetic { problem, factors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_embeddings_give_mean_square_rating() {
        let train = vec![
            Rating {
                user: 0,
                item: 0,
                value: 2.0,
            },
            Rating {
                user: 1,
                item: 1,
                value: 4.0,
            },
        ];
        let p = MatrixFactorization::new(2, 2, 3, train, vec![]).unwrap();
        let f = mf_eval(&p, &[0.0; 12], None).unwrap();
        assert_eq!(f, (4.0 + 16.0) / 2.0);
    }

    #[test]
    fn single_rating_hand_gradient() {
        let train = vec![Rating {
            user: 0,
            item: 0,
            value: 2.0,
        }];
        let p = MatrixFactorization::new(1, 1, 1, train, vec![])
            .unwrap()
            .with_regularization(0.0, 0.0);
        assert_eq!(mf_eval(&p, &[1.0, 1.0], None).unwrap(), 1.0);
        assert_eq!(mf_grad(&p, &[1.0, 1.0], None).unwrap(), vec![-2.0, -2.0]);
    }

    #[test]
    fn empty_batch_is_error() {
        let train = vec![Rating {
            user: 0,
            item: 0,
            value: 2.0,
        }];
        let p = MatrixFactorization::new(1, 1, 1, train, vec![]).unwrap();
        assert!(matches!(
            mf_eval(&p, &[0.0, 0.0], Some(&[])),
            Err(Error::EmptyBatch)
        ));
        assert!(matches!(
            mf_grad(&p, &[0.0, 0.0], Some(&[])),
            Err(Error::EmptyBatch)
        ));
    }

    #[test]
    fn noiseless_synth_loss_is_regularization_only() {
        let spec = SynthSpec {
            users: 10,
            items: 12,
            rank: 3,
            ratings: 60,
            noise: 0.0,
            seed: 4,
        };
        let s = synth_ratings(&spec).unwrap();
        let p = &s.problem;
        let f = mf_eval(p, &s.factors, None).unwrap();
        assert!((f - p.regularization(&s.factors)).abs() < 1e-12);
        assert_eq!(p.train().len(), 48);
        assert_eq!(p.test().len(), 12);
    }
}
