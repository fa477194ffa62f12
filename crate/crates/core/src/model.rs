//! Problem instances and the exact-recovery criterion.
//!
//! Indices are 0-based everywhere in the library.

use std::collections::BTreeSet;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crate::numeric::{binary_entropy, kl_bernoulli};

/// Priors are kept this far away from 0 and 1.
pub const PRIOR_CLAMP: f64 = 1e-12;

/// Inputs of one recovery trial: `y = A x + z` with `‖x‖₀ = K`.
#[derive(Debug, Clone)]
pub struct RecoveryProblem {
    a: DMatrix<f64>,
    y: DVector<f64>,
    k: usize,
    sigma2: f64,
    priors: Vec<f64>,
}

impl RecoveryProblem {
    /// `priors = None` means 0.5 for every index.
    pub fn new(
        a: DMatrix<f64>,
        y: DVector<f64>,
        k: usize,
        sigma2: f64,
        priors: Option<Vec<f64>>,
    ) -> Result<Self> {
        let (m, n) = a.shape();
        if m == 0 {
            return Err(Error::InvalidParameter("measurement matrix has no rows".into()));
        }
        if y.len() != m {
            return Err(Error::Dimension(format!("y has length {}, A has {m} rows", y.len())));
        }
        if k == 0 || n <= k + 1 {
            return Err(Error::InvalidParameter(format!(
                "need 1 <= K and N > K + 1, got K = {k}, N = {n}"
            )));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} must be finite and >= 0")));
        }
        let priors = match priors {
            None => vec![0.5; n],
            Some(p) => {
                if p.len() != n {
                    return Err(Error::Dimension(format!("{} priors for N = {n}", p.len())));
                }
                p.into_iter()
                    .map(|v| {
                        if (0.0..=1.0).contains(&v) {
                            Ok(v.clamp(PRIOR_CLAMP, 1.0 - PRIOR_CLAMP))
                        } else {
                            Err(Error::InvalidParameter(format!("prior {v} outside [0, 1]")))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        if sigma2 == 0.0 && !priors_uniform(&priors) {
            return Err(Error::NoiseFreeWithPriors);
        }
        Ok(Self {
            a,
            y,
            k,
            sigma2,
            priors,
        })
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn y(&self) -> &DVector<f64> {
        &self.y
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.a.nrows()
    }

    pub fn n(&self) -> usize {
        self.a.ncols()
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn has_uniform_priors(&self) -> bool {
        priors_uniform(&self.priors)
    }
}

/// All priors identical, so the prior term never changes an argmax.
pub fn priors_uniform(priors: &[f64]) -> bool {
    priors.windows(2).all(|w| w[0] == w[1])
}

/// True support and nonzero values. Held by the harness for scoring only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    support: Vec<usize>,
    values: Vec<f64>,
    n: usize,
}

impl GroundTruth {
    pub fn new(support: Vec<usize>, values: Vec<f64>, n: usize) -> Result<Self> {
        if support.len() != values.len() {
            return Err(Error::Dimension(format!(
                "{} support indices but {} values",
                support.len(),
                values.len()
            )));
        }
        let mut pairs: Vec<(usize, f64)> = support.into_iter().zip(values).collect();
        pairs.sort_by_key(|&(i, _)| i);
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("duplicate support index".into()));
        }
        if let Some(&(i, _)) = pairs.iter().find(|&&(i, _)| i >= n) {
            return Err(Error::InvalidParameter(format!("support index {i} >= N = {n}")));
        }
        if pairs.iter().any(|&(_, v)| v == 0.0 || !v.is_finite()) {
            return Err(Error::InvalidParameter("support values must be finite and nonzero".into()));
        }
        let (support, values) = pairs.into_iter().unzip();
        Ok(Self { support, values, n })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.support.len()
    }

    /// The length-N signal vector.
    pub fn dense(&self) -> DVector<f64> {
        let mut x = DVector::zeros(self.n);
        for (&i, &v) in self.support.iter().zip(&self.values) {
            x[i] = v;
        }
        x
    }
}

/// Indices in selection order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SupportEstimate {
    indices: Vec<usize>,
}

impl SupportEstimate {
    pub fn new(indices: Vec<usize>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for &i in &indices {
            if !seen.insert(i) {
                return Err(Error::InvalidParameter(format!("duplicate index {i} in support estimate")));
            }
        }
        Ok(Self { indices })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.contains(&i)
    }

    pub fn sorted(&self) -> Vec<usize> {
        let mut v = self.indices.clone();
        v.sort_unstable();
        v
    }

    pub(crate) fn push(&mut self, i: usize) {
        debug_assert!(!self.contains(i));
        self.indices.push(i);
    }

    pub fn check_bounds(&self, n: usize) -> Result<()> {
        match self.indices.iter().find(|&&i| i >= n) {
            Some(i) => Err(Error::InvalidParameter(format!("index {i} >= N = {n}"))),
            None => Ok(()),
        }
    }
}

/// Exact support recovery: the estimated index set equals the true support.
pub fn exact_recovery(est: &SupportEstimate, truth: &GroundTruth) -> bool {
    est.sorted() == truth.support
}
