//! Experiment configuration, read from TOML.
//!
//! ```toml
//! iterations = 1000
//! noise = 0.05            # optional gradient noise level
//!
//! [problem]
//! name = "rosenbrock"     # quadratic | rastrigin | rosenbrock | polynomial
//!                         # | phase_retrieval | matrix_factorization
//! dimension = 2
//! seed = 7                # required by any stochastic component
//! init = "rosenbrock-2d-start"   # preset, explicit vector, or { box = [lo, hi] }
//!
//! [optimizer]
//! name = "adaptive_rsav"
//! lr = 1e-2
//!
//! [operator]
//! kind = "zero"
//!
//! [output]
//! trace = "rosenbrock.csv"
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operators::OperatorKind;
use crate::problems::TruthKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemName {
    Quadratic,
    Rastrigin,
    #[serde(alias = "rosenbrock2d")]
    Rosenbrock,
    /// Separable quartic `Σ p(θ_i)`; coefficients in `params.coeffs`.
    Polynomial,
    PhaseRetrieval,
    MatrixFactorization,
}

impl ProblemName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Quadratic => "quadratic",
            Self::Rastrigin => "rastrigin",
            Self::Rosenbrock => "rosenbrock",
            Self::Polynomial => "polynomial",
            Self::PhaseRetrieval => "phase_retrieval",
            Self::MatrixFactorization => "matrix_factorization",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerName {
    Gd,
    Nag,
    Adam,
    Sd,
    Sav,
    Savgd,
    Msav,
    LegacySav,
    Rsav,
    AdaptiveRsav,
    Rsavq,
    LinesearchSav,
}

impl OptimizerName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Gd => "gd",
            Self::Nag => "nag",
            Self::Adam => "adam",
            Self::Sd => "sd",
            Self::Sav => "sav",
            Self::Savgd => "savgd",
            Self::Msav => "msav",
            Self::LegacySav => "legacy_sav",
            Self::Rsav => "rsav",
            Self::AdaptiveRsav => "adaptive_rsav",
            Self::Rsavq => "rsavq",
            Self::LinesearchSav => "linesearch_sav",
        }
    }

    /// Methods carrying an auxiliary variable.
    pub fn is_sav(self) -> bool {
        !matches!(self, Self::Gd | Self::Nag | Self::Adam | Self::Sd)
    }
}

/// Starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Init {
    /// `ones`, `zeros`, `rosenbrock-2d-start`, `box-random` or `random`.
    Preset(String),
    Vector(Vec<f64>),
    Box {
        r#box: [f64; 2],
    },
}

impl Default for Init {
    fn default() -> Self {
        Init::Preset("ones".into())
    }
}

/// Problem-specific parameters. Unused fields are ignored by other problems.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    /// Rosenbrock `a`, `b`.
    pub a: Option<f64>,
    pub b: Option<f64>,
    /// Polynomial coefficients `c0..c4` and center.
    pub coeffs: Option<[f64; 5]>,
    pub center: Option<f64>,
    /// Phase retrieval: signal shape (`[n]` or `[rows, cols]`), mask count, truth kind.
    pub shape: Option<Vec<usize>>,
    pub masks: Option<usize>,
    pub truth: Option<TruthKind>,
    /// Matrix factorization: ratings file, or synthetic sizes.
    pub ratings_file: Option<PathBuf>,
    pub users: Option<usize>,
    pub items: Option<usize>,
    pub rank: Option<usize>,
    pub ratings: Option<usize>,
    pub rating_noise: Option<f64>,
    pub embedding_dim: Option<usize>,
    pub lambda_user: Option<f64>,
    pub lambda_item: Option<f64>,
    /// Standard deviation of the random initial embeddings.
    pub init_scale: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: ProblemName,
    pub dimension: Option<usize>,
    #[serde(default)]
    pub params: ProblemParams,
    pub seed: Option<u64>,
    #[serde(default)]
    pub init: Init,
    /// Overrides the problem's default `C`.
    pub shift: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub name: OptimizerName,
    /// Learning rate / initial step size.
    #[serde(default = "default_lr")]
    pub lr: f64,
    pub eta: Option<f64>,
    pub rho: Option<f64>,
    pub gamma: Option<f64>,
    pub dt_min: Option<f64>,
    pub q: Option<f64>,
    pub restart: Option<bool>,
    /// `[c1, c2]`; enables backtracking for `linesearch_sav`.
    pub wolfe: Option<[f64; 2]>,
    /// Lower-bound constant of the split energy for `legacy_sav`.
    pub c_g: Option<f64>,
    /// NAG momentum.
    pub momentum: Option<f64>,
    pub beta1: Option<f64>,
    pub beta2: Option<f64>,
    pub eps: Option<f64>,
}

fn default_lr() -> f64 {
    0.01
}

impl OptimizerConfig {
    pub fn named(name: OptimizerName, lr: f64) -> Self {
        Self {
            name,
            lr,
            eta: None,
            rho: None,
            gamma: None,
            dt_min: None,
            q: None,
            restart: None,
            wolfe: None,
            c_g: None,
            momentum: None,
            beta1: None,
            beta2: None,
            eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: OperatorKind,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub sigma: f64,
    /// Explicit entries for `kind = "diagonal"`.
    pub entries: Option<Vec<f64>>,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            kind: OperatorKind::Zero,
            lambda: 0.0,
            sigma: 0.0,
            entries: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BatchConfig {
    pub size: usize,
    pub epochs: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub trace: Option<PathBuf>,
    #[serde(default)]
    pub format: TraceFormat,
    pub plot: Option<PathBuf>,
}

/// Grid of optimizers × step sizes for `compare`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    pub optimizers: Vec<OptimizerConfig>,
    pub step_sizes: Vec<f64>,
    /// Directory receiving one trace per cell plus `summary.txt`.
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub optimizer: Option<OptimizerConfig>,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub iterations: usize,
    #[serde(default)]
    pub noise: f64,
    pub batch: Option<BatchConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    pub compare: Option<CompareConfig>,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Replace every seed in the configuration.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.problem.seed = Some(seed);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(self.noise.is_finite() && self.noise >= 0.0) {
            return bad("noise must be a nonnegative number");
        }
        let seeded = self.problem.seed.is_some();
        let needs_seed = self.noise > 0.0
            || self.batch.is_some()
            || matches!(
                self.problem.name,
                ProblemName::PhaseRetrieval | ProblemName::MatrixFactorization
            )
            || matches!(&self.problem.init, Init::Box { .. })
            || matches!(&self.problem.init, Init::Preset(p) if p == "box-random" || p == "random");
        if needs_seed && !seeded {
            return bad("problem.seed is required for stochastic components");
        }
        if let Init::Preset(p) = &self.problem.init {
            if ![
                "ones",
                "zeros",
                "rosenbrock-2d-start",
                "box-random",
                "random",
            ]
            .contains(&p.as_str())
            {
                return Err(Error::Config(format!("unknown init preset {p:?}")));
            }
        }
        if let Some(b) = &self.batch {
            if b.size == 0 || b.epochs == 0 {
                return bad("batch size and epochs must be positive");
            }
            if self.problem.name != ProblemName::MatrixFactorization {
                return bad("mini-batching is only defined for matrix_factorization");
            }
        }
        match (&self.optimizer, &self.compare) {
            (None, None) => return bad("either [optimizer] or [compare] is required"),
            (_, Some(c)) if c.optimizers.is_empty() || c.step_sizes.is_empty() => {
                return bad("compare needs at least one optimizer and one step size")
            }
            _ => {}
        }
        for o in self
            .optimizer
            .iter()
            .chain(self.compare.iter().flat_map(|c| &c.optimizers))
        {
            if !(o.lr.is_finite() && o.lr > 0.0) {
                return Err(Error::Config(format!(
                    "{}: lr must be positive",
                    o.name.as_str()
                )));
            }
        }
        if let Some(c) = &self.compare {
            if c.step_sizes.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
                return bad("step sizes must be positive");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_config() {
        let cfg = ExperimentConfig::from_toml(
            r#"
            iterations = 10
            [problem]
            name = "quadratic"
            [optimizer]
            name = "gd"
            lr = 0.1
            "#,
        )
        .unwrap();
        assert_eq!(cfg.problem.init, Init::Preset("ones".into()));
        assert_eq!(cfg.operator.kind, OperatorKind::Zero);
    }

    #[test]
    fn init_forms() {
        let v: ProblemConfig = toml::from_str("name = \"rosenbrock\"\ninit = [1.0, 2.0]").unwrap();
        assert_eq!(v.init, Init::Vector(vec![1.0, 2.0]));
        let b: ProblemConfig =
            toml::from_str("name = \"rastrigin\"\ninit = { box = [-1.0, 1.0] }").unwrap();
        assert_eq!(b.init, Init::Box { r#box: [-1.0, 1.0] });
    }

    #[test]
    fn rejects_unknown_names_and_missing_seeds() {
        let unknown = "[problem]\nname = \"quadratic\"\n[optimizer]\nname = \"lbfgs\"";
        assert!(matches!(
            ExperimentConfig::from_toml(unknown),
            Err(Error::Config(_))
        ));
        let unseeded = "noise = 0.1\n[problem]\nname = \"quadratic\"\n[optimizer]\nname = \"gd\"";
        assert!(matches!(
            ExperimentConfig::from_toml(unseeded),
            Err(Error::Config(_))
        ));
    }
}
