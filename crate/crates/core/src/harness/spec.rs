use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ensembles::{MatrixEnsemble, SignalModel};
use crate::error::{Error, Result};
use crate::solvers::{Algorithm, ResidualMode, SolverConfig};

/// How support priors are set for a trial.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PriorMode {
    /// `p_j = 0.5` everywhere.
    #[default]
    Uniform,
    /// `p_j = p_hi` on the true support, 0.5 elsewhere.
    SupportBoost(f64),
}

impl PriorMode {
    pub fn label(&self) -> String {
        match self {
            PriorMode::Uniform => "uniform".into(),
            PriorMode::SupportBoost(p) => format!("support_boost({p})"),
        }
    }
}

/// One solver column of a sweep. Unset fields take the per-`K` defaults of
/// [`SolverConfig::new`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSpec {
    pub algorithm: Algorithm,
    /// Name used in result rows; defaults to the algorithm name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Feed the trial's support priors to the B-MAP proxy. Baselines never
    /// see priors.
    #[serde(default = "yes")]
    pub use_priors: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_mode: Option<ResidualMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub two_sided: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection_size: Option<usize>,
}

fn yes() -> bool {
    true
}

impl AlgorithmSpec {
    pub fn new(algorithm: Algorithm) -> Self {
        Self {
            algorithm,
            label: None,
            use_priors: true,
            residual_mode: None,
            two_sided: None,
            max_iters: None,
            selection_size: None,
        }
    }

    pub fn labelled(mut self, label: &str) -> Self {
        self.label = Some(label.to_owned());
        self
    }

    pub fn without_priors(mut self) -> Self {
        self.use_priors = false;
        self
    }

    pub fn label(&self) -> &str {
        self.label.as_deref().unwrap_or(self.algorithm.name())
    }

    pub fn uses_priors(&self) -> bool {
        self.use_priors && self.algorithm.uses_bmap_proxy()
    }

    pub fn resolve(&self, k: usize, model: &SignalModel) -> SolverConfig {
        let mut cfg = SolverConfig::new(self.algorithm, k, model);
        if let Some(mode) = self.residual_mode {
            cfg.residual_mode = mode;
        }
        if let Some(two) = self.two_sided {
            cfg.two_sided = two;
        }
        if let Some(it) = self.max_iters {
            cfg.max_iters = it;
        }
        if let Some(l) = self.selection_size {
            cfg.selection_size = l;
        }
        cfg
    }
}

/// A Monte Carlo sweep over sparsity levels. Field names are the config
/// file keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "K_values")]
    pub k_values: Vec<usize>,
    pub ensemble: MatrixEnsemble,
    pub signal: SignalModel,
    /// Absent means noise-free.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    pub algorithms: Vec<AlgorithmSpec>,
    pub trials: u64,
    pub base_seed: u64,
    #[serde(default)]
    pub prior_mode: PriorMode,
}

impl SweepSpec {
    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("spec serialises")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.m == 0 {
            return bad("M must be at least 1".into());
        }
        for &k in &self.k_values {
            // a generic M-row matrix has every M columns independent, so a
            // K-sparse solution is unique exactly when 2K <= M
            if k == 0 || 2 * k > self.m {
                return bad(format!("K = {k} must satisfy 1 <= K <= M/2 with M = {}", self.m));
            }
            if self.n <= k + 1 {
                return bad(format!("N = {} must exceed K + 1 = {}", self.n, k + 1));
            }
        }
        self.signal.validate().map_err(|e| Error::Config(format!("signal: {e}")))?;
        if let Some(db) = self.snr_db {
            if !db.is_finite() {
                return bad(format!("snr_db = {db} must be finite"));
            }
        }
        if let PriorMode::SupportBoost(p) = self.prior_mode {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("support_boost = {p} must lie in (0, 1)"));
            }
            if self.snr_db.is_none() && p != 0.5 && self.algorithms.iter().any(|a| a.uses_priors()) {
                return bad("noise-free sweeps cannot feed non-uniform priors to B-MAP; set snr_db or use_priors = false".into());
            }
        }
        let mut seen = HashSet::new();
        for alg in &self.algorithms {
            if !seen.insert(alg.label()) {
                return bad(format!("duplicate algorithm label {:?}", alg.label()));
            }
            if alg.selection_size == Some(0) || alg.max_iters == Some(0) {
                return bad(format!("{}: selection_size and max_iters must be positive", alg.label()));
            }
        }
        Ok(())
    }
}
