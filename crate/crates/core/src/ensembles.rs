//! Random measurement matrices, sparse signals, supports and noisy measurements.
//!
//! Every generator is a pure function of its parameters and the [`Rng`] it
//! is handed; nothing here reads global state.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{priors_uniform, GroundTruth};
use crate::numeric::{normal_cdf, normal_quantile};
use crate::rng::Rng;

/// Default tail mass used when picking `β*`.
pub const DEFAULT_DELTA: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MatrixEnsemble {
    /// i.i.d. `N(0, 1/M)`.
    #[serde(rename = "gaussian")]
    GaussianInvM,
    /// i.i.d. `Unif[0, 1]`.
    #[serde(rename = "uniform01")]
    Uniform01,
    /// i.i.d. `Unif[-0.5, 0.5]`.
    #[serde(rename = "uniform_sym")]
    UniformSym,
    /// i.i.d. `{0, 1}` with probability 1/2 each.
    #[serde(rename = "bernoulli01")]
    Bernoulli01,
}

impl MatrixEnsemble {
    pub const ALL: [MatrixEnsemble; 4] = [
        MatrixEnsemble::GaussianInvM,
        MatrixEnsemble::Uniform01,
        MatrixEnsemble::UniformSym,
        MatrixEnsemble::Bernoulli01,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MatrixEnsemble::GaussianInvM => "gaussian",
            MatrixEnsemble::Uniform01 => "uniform01",
            MatrixEnsemble::UniformSym => "uniform_sym",
            MatrixEnsemble::Bernoulli01 => "bernoulli01",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == name)
    }
}

impl fmt::Display for MatrixEnsemble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Draw an `M × N` matrix, entries generated column by column.
pub fn generate_matrix(ens: MatrixEnsemble, m: usize, n: usize, rng: &mut Rng) -> DMatrix<f64> {
    let sd = 1.0 / (m as f64).sqrt();
    let data: Vec<f64> = (0..m * n)
        .map(|_| match ens {
            MatrixEnsemble::GaussianInvM => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            MatrixEnsemble::Uniform01 => rng.random::<f64>(),
            MatrixEnsemble::UniformSym => rng.random::<f64>() - 0.5,
            MatrixEnsemble::Bernoulli01 => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    0.0
                }
            }
        })
        .collect();
    DMatrix::from_vec(m, n, data)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Positive,
    Negative,
}

/// Law of a nonzero entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonzeroDistribution {
    Uniform { lo: f64, hi: f64 },
    Normal { mean: f64, sd: f64 },
    /// Positive part with probability `p_positive`, negative part otherwise.
    SignMixture {
        p_positive: f64,
        positive: Box<NonzeroDistribution>,
        negative: Box<NonzeroDistribution>,
    },
}

impl NonzeroDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            NonzeroDistribution::Uniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                    return Err(Error::InvalidParameter(format!("uniform law needs lo < hi, got [{lo}, {hi}]")));
                }
            }
            NonzeroDistribution::Normal { mean, sd } => {
                if !(mean.is_finite() && sd.is_finite() && *sd > 0.0) {
                    return Err(Error::InvalidParameter(format!("normal law needs sd > 0, got sd = {sd}")));
                }
            }
            NonzeroDistribution::SignMixture {
                p_positive,
                positive,
                negative,
            } => {
                if !(0.0..=1.0).contains(p_positive) {
                    return Err(Error::InvalidParameter(format!("p_positive = {p_positive} outside [0, 1]")));
                }
                positive.validate()?;
                negative.validate()?;
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            NonzeroDistribution::Uniform { lo, hi } => 0.5 * (lo + hi),
            NonzeroDistribution::Normal { mean, .. } => *mean,
            NonzeroDistribution::SignMixture {
                p_positive,
                positive,
                negative,
            } => p_positive * positive.mean() + (1.0 - p_positive) * negative.mean(),
        }
    }

    /// `E[x²]`.
    pub fn second_moment(&self) -> f64 {
        match self {
            NonzeroDistribution::Uniform { lo, hi } => (lo * lo + lo * hi + hi * hi) / 3.0,
            NonzeroDistribution::Normal { mean, sd } => mean * mean + sd * sd,
            NonzeroDistribution::SignMixture {
                p_positive,
                positive,
                negative,
            } => p_positive * positive.second_moment() + (1.0 - p_positive) * negative.second_moment(),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self {
            NonzeroDistribution::Uniform { lo, hi } => ((x - lo) / (hi - lo)).clamp(0.0, 1.0),
            NonzeroDistribution::Normal { mean, sd } => normal_cdf((x - mean) / sd),
            NonzeroDistribution::SignMixture {
                p_positive,
                positive,
                negative,
            } => p_positive * positive.cdf(x) + (1.0 - p_positive) * negative.cdf(x),
        }
    }

    pub fn quantile(&self, u: f64) -> f64 {
        match self {
            NonzeroDistribution::Uniform { lo, hi } => lo + u * (hi - lo),
            NonzeroDistribution::Normal { mean, sd } => mean + sd * normal_quantile(u),
            NonzeroDistribution::SignMixture { .. } => self.quantile_by_bisection(u),
        }
    }

    fn quantile_by_bisection(&self, u: f64) -> f64 {
        let (mut lo, mut hi) = (-1.0, 1.0);
        while self.cdf(lo) > u {
            lo *= 2.0;
        }
        while self.cdf(hi) < u {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// `P(x > 0)`.
    pub fn positive_mass(&self) -> f64 {
        1.0 - self.cdf(0.0)
    }

    /// Quantile of the law conditioned on the sign of `x`.
    pub fn conditional_quantile(&self, sign: Sign, u: f64) -> f64 {
        match self {
            NonzeroDistribution::SignMixture {
                positive, negative, ..
            } => match sign {
                Sign::Positive => positive.conditional_quantile(sign, u),
                Sign::Negative => negative.conditional_quantile(sign, u),
            },
            _ => {
                let f0 = self.cdf(0.0);
                match sign {
                    Sign::Positive => self.quantile(f0 + u * (1.0 - f0)),
                    Sign::Negative => self.quantile(u * f0),
                }
            }
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match self {
            NonzeroDistribution::Uniform { lo, hi } => lo + (hi - lo) * rng.random::<f64>(),
            NonzeroDistribution::Normal { mean, sd } => {
                let z: f64 = StandardNormal.sample(rng);
                mean + sd * z
            }
            NonzeroDistribution::SignMixture {
                p_positive,
                positive,
                negative,
            } => {
                if rng.random::<f64>() < *p_positive {
                    positive.sample(rng)
                } else {
                    negative.sample(rng)
                }
            }
        }
    }

    fn negated(&self) -> NonzeroDistribution {
        match self {
            NonzeroDistribution::Uniform { lo, hi } => NonzeroDistribution::Uniform { lo: -hi, hi: -lo },
            NonzeroDistribution::Normal { mean, sd } => NonzeroDistribution::Normal { mean: -mean, sd: *sd },
            NonzeroDistribution::SignMixture {
                p_positive,
                positive,
                negative,
            } => NonzeroDistribution::SignMixture {
                p_positive: 1.0 - p_positive,
                positive: Box::new(negative.negated()),
                negative: Box::new(positive.negated()),
            },
        }
    }
}

/// How the lower `δ` quantile is obtained when choosing `β*`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TailRule {
    /// The distribution's exact quantile.
    #[default]
    Exact,
    /// For normal laws, use `mean - z·sd` in place of the exact quantile
    /// (e.g. `z = 3.1` for `δ = 0.001`). Other laws ignore it.
    FixedZ(f64),
}

/// `β* = min{ m_X, 2·F⁻¹(δ) }`, the largest `β > 0` with `P(x ≥ β/2) ≥ 1 - δ`
/// capped at the mean.
pub fn beta_star_one_sided(dist: &NonzeroDistribution, delta: f64) -> Result<f64> {
    beta_star_one_sided_with(dist, delta, TailRule::Exact)
}

pub fn beta_star_one_sided_with(dist: &NonzeroDistribution, delta: f64, rule: TailRule) -> Result<f64> {
    check_delta(delta)?;
    let q = match (rule, dist) {
        (TailRule::FixedZ(z), NonzeroDistribution::Normal { mean, sd }) => mean - z * sd,
        _ => dist.quantile(delta),
    };
    let beta = dist.mean().min(2.0 * q);
    if beta > 0.0 && beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::Domain(format!(
            "no positive beta*: 2 F^-1({delta}) = {:.6}, mean = {:.6}; the law is too dispersed",
            2.0 * q,
            dist.mean()
        )))
    }
}

/// `β* = min{|β*₊|, |β*₋|}` from the sign-conditional laws, without a mean cap.
pub fn beta_star_two_sided(dist: &NonzeroDistribution, delta: f64) -> Result<f64> {
    check_delta(delta)?;
    let p_pos = dist.positive_mass();
    if p_pos < delta || 1.0 - p_pos < delta {
        return Err(Error::Domain(format!(
            "P(x > 0) = {p_pos:.6}: one sign carries less than delta = {delta}; use the one-sided rule"
        )));
    }
    let beta_pos = 2.0 * dist.conditional_quantile(Sign::Positive, delta);
    let beta_neg = 2.0 * dist.conditional_quantile(Sign::Negative, 1.0 - delta);
    let beta = beta_pos.abs().min(beta_neg.abs());
    if beta > 0.0 && beta.is_finite() {
        Ok(beta)
    } else {
        Err(Error::Domain(format!("degenerate two-sided beta* (+{beta_pos}, {beta_neg})")))
    }
}

fn check_delta(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("delta = {delta} outside (0, 1)")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SignalKind {
    Constant { beta: f64 },
    OneSided { dist: NonzeroDistribution },
    TwoSided { dist: NonzeroDistribution },
}

/// Law of the nonzero entries plus the parameters that fix `β*`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    #[serde(flatten)]
    pub kind: SignalKind,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub tail_rule: TailRule,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

impl SignalModel {
    pub fn constant(beta: f64) -> Result<Self> {
        let m = Self {
            kind: SignalKind::Constant { beta },
            delta: DEFAULT_DELTA,
            tail_rule: TailRule::Exact,
        };
        m.validate()?;
        Ok(m)
    }

    /// Binary signal, `β = 1`.
    pub fn binary() -> Self {
        Self::constant(1.0).expect("beta = 1 is valid")
    }

    pub fn one_sided(dist: NonzeroDistribution, delta: f64) -> Result<Self> {
        let m = Self {
            kind: SignalKind::OneSided { dist },
            delta,
            tail_rule: TailRule::Exact,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn two_sided(dist: NonzeroDistribution, delta: f64) -> Result<Self> {
        let m = Self {
            kind: SignalKind::TwoSided { dist },
            delta,
            tail_rule: TailRule::Exact,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn with_tail_rule(mut self, rule: TailRule) -> Self {
        self.tail_rule = rule;
        self
    }

    /// Checks the invariants, including the one-sidedness probe
    /// `F⁻¹(δ) > 0` or `F⁻¹(1 - δ) < 0`.
    pub fn validate(&self) -> Result<()> {
        check_delta(self.delta)?;
        match &self.kind {
            SignalKind::Constant { beta } => {
                if *beta == 0.0 || !beta.is_finite() {
                    return Err(Error::InvalidParameter(format!("constant signal value {beta} must be nonzero")));
                }
            }
            SignalKind::OneSided { dist } => {
                dist.validate()?;
                if !(dist.quantile(self.delta) > 0.0 || dist.quantile(1.0 - self.delta) < 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "law is not one-sided at delta = {}: P(x > 0) = {:.6}",
                        self.delta,
                        dist.positive_mass()
                    )));
                }
            }
            SignalKind::TwoSided { dist } => dist.validate()?,
        }
        Ok(())
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.kind, SignalKind::Constant { .. })
    }

    pub fn is_two_sided(&self) -> bool {
        matches!(self.kind, SignalKind::TwoSided { .. })
    }

    /// The amplitude the proxy assumes. Negative for a negative one-sided law
    /// or a negative constant.
    pub fn beta_star(&self) -> Result<f64> {
        match &self.kind {
            SignalKind::Constant { beta } => Ok(*beta),
            SignalKind::OneSided { dist } => {
                if dist.quantile(self.delta) > 0.0 {
                    beta_star_one_sided_with(dist, self.delta, self.tail_rule)
                } else {
                    beta_star_one_sided_with(&dist.negated(), self.delta, self.tail_rule).map(|b| -b)
                }
            }
            SignalKind::TwoSided { dist } => beta_star_two_sided(dist, self.delta),
        }
    }

    /// `E[x_i²]` for a support entry.
    pub fn second_moment(&self) -> f64 {
        match &self.kind {
            SignalKind::Constant { beta } => beta * beta,
            SignalKind::OneSided { dist } | SignalKind::TwoSided { dist } => dist.second_moment(),
        }
    }

    pub fn sample_value(&self, rng: &mut Rng) -> f64 {
        match &self.kind {
            SignalKind::Constant { beta } => *beta,
            SignalKind::OneSided { dist } | SignalKind::TwoSided { dist } => loop {
                let v = dist.sample(rng);
                if v != 0.0 {
                    break v;
                }
            },
        }
    }

    pub fn label(&self) -> String {
        match &self.kind {
            SignalKind::Constant { beta } => format!("constant({beta})"),
            SignalKind::OneSided { dist } => format!("one_sided({})", dist_label(dist)),
            SignalKind::TwoSided { dist } => format!("two_sided({})", dist_label(dist)),
        }
    }
}

fn dist_label(d: &NonzeroDistribution) -> String {
    match d {
        NonzeroDistribution::Uniform { lo, hi } => format!("unif[{lo},{hi}]"),
        NonzeroDistribution::Normal { mean, sd } => format!("normal({mean},{sd})"),
        NonzeroDistribution::SignMixture {
            p_positive,
            positive,
            negative,
        } => format!("mix({p_positive};{};{})", dist_label(positive), dist_label(negative)),
    }
}

/// Draw `K` distinct indices out of `N`, returned sorted.
///
/// Uniform priors give every `K`-subset the same probability. Otherwise indices
/// are drawn one at a time without replacement with weights `p_j`.
pub fn sample_support(n: usize, k: usize, priors: &[f64], rng: &mut Rng) -> Result<Vec<usize>> {
    if k > n {
        return Err(Error::InvalidParameter(format!("K = {k} exceeds N = {n}")));
    }
    if priors.len() != n {
        return Err(Error::Dimension(format!("{} priors for N = {n}", priors.len())));
    }
    let mut support = if priors_uniform(priors) {
        rand::seq::index::sample(rng, n, k).into_vec()
    } else {
        let mut weights = priors.to_vec();
        let mut chosen = Vec::with_capacity(k);
        for _ in 0..k {
            let total: f64 = weights.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = None;
            for (j, &w) in weights.iter().enumerate() {
                if w <= 0.0 {
                    continue;
                }
                pick = Some(j);
                if u < w {
                    break;
                }
                u -= w;
            }
            let j = pick.ok_or_else(|| Error::InvalidParameter("priors leave no index to draw".into()))?;
            weights[j] = 0.0;
            chosen.push(j);
        }
        chosen
    };
    support.sort_unstable();
    Ok(support)
}

pub fn sample_signal(model: &SignalModel, support: &[usize], n: usize, rng: &mut Rng) -> Result<GroundTruth> {
    let values = support.iter().map(|_| model.sample_value(rng)).collect();
    GroundTruth::new(support.to_vec(), values, n)
}

/// Noise variance giving `E‖x‖² / E‖z‖² = snr_linear`, with `E‖x‖² = K·E[x²]`.
pub fn sigma2_from_snr(model: &SignalModel, k: usize, m: usize, snr_linear: f64) -> Result<f64> {
    if !(snr_linear > 0.0) {
        return Err(Error::InvalidParameter(format!("snr = {snr_linear} must be positive")));
    }
    Ok(k as f64 * model.second_moment() / (m as f64 * snr_linear))
}

pub fn snr_db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `y = A x + z`, `z ~ N(0, σ² I)`.
pub fn measure(a: &DMatrix<f64>, truth: &GroundTruth, sigma2: f64, rng: &mut Rng) -> Result<DVector<f64>> {
    if a.ncols() != truth.n() {
        return Err(Error::Dimension(format!("A has {} columns, signal has N = {}", a.ncols(), truth.n())));
    }
    if !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!("sigma2 = {sigma2} must be >= 0")));
    }
    let mut y = DVector::zeros(a.nrows());
    for (&j, &v) in truth.support().iter().zip(truth.values()) {
        y.axpy(v, &a.column(j), 1.0);
    }
    if sigma2 > 0.0 {
        let sd = sigma2.sqrt();
        for yi in y.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *yi += sd * z;
        }
    }
    Ok(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn mean_var(xs: impl Iterator<Item = f64>) -> (f64, f64, usize) {
        let v: Vec<f64> = xs.collect();
        let n = v.len();
        let mean = v.iter().sum::<f64>() / n as f64;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        (mean, var, n)
    }

    #[test]
    fn gaussian_entry_variance_is_one_over_m() {
        let mut rng = Rng::new(11, 0);
        let a = generate_matrix(MatrixEnsemble::GaussianInvM, 64, 1563, &mut rng);
        let (_, var, n) = mean_var(a.iter().copied());
        assert!(n >= 100_000);
        // stderr of the sample variance of a normal: σ²·sqrt(2/(n-1))
        let target = 1.0 / 64.0;
        let stderr = target * (2.0 / (n as f64 - 1.0)).sqrt();
        assert!((var - target).abs() <= 3.0 * stderr, "var {var} vs {target}");
    }

    #[test]
    fn gaussian_column_energy_is_one() {
        let mut rng = Rng::new(12, 0);
        let a = generate_matrix(MatrixEnsemble::GaussianInvM, 32, 4000, &mut rng);
        let (mean, var, n) = mean_var(a.column_iter().map(|c| c.norm_squared()));
        assert!((mean - 1.0).abs() <= 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn bernoulli_entries_are_binary_and_fair() {
        let mut rng = Rng::new(13, 0);
        let a = generate_matrix(MatrixEnsemble::Bernoulli01, 50, 400, &mut rng);
        assert!(a.iter().all(|&v| v == 0.0 || v == 1.0));
        let (mean, _, n) = mean_var(a.iter().copied());
        assert!((mean - 0.5).abs() <= 3.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn uniform_ranges() {
        let mut rng = Rng::new(14, 0);
        let a = generate_matrix(MatrixEnsemble::Uniform01, 20, 50, &mut rng);
        assert!(a.iter().all(|&v| (0.0..1.0).contains(&v)));
        let b = generate_matrix(MatrixEnsemble::UniformSym, 20, 50, &mut rng);
        assert!(b.iter().all(|&v| (-0.5..0.5).contains(&v)));
    }

    #[test]
    fn matrix_is_deterministic() {
        for ens in MatrixEnsemble::ALL {
            let a = generate_matrix(ens, 8, 12, &mut Rng::new(5, 77));
            let b = generate_matrix(ens, 8, 12, &mut Rng::new(5, 77));
            assert_eq!(a, b);
        }
    }

    #[test]
    fn support_uniform_marginals() {
        let mut rng = Rng::new(21, 0);
        let draws = 10_000;
        let mut counts = [0usize; 4];
        for _ in 0..draws {
            let s = sample_support(4, 1, &[0.5; 4], &mut rng).unwrap();
            counts[s[0]] += 1;
        }
        let stderr = (0.25f64 * 0.75 / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - 0.25).abs() <= 3.0 * stderr, "{counts:?}");
        }
    }

    #[test]
    fn support_marginal_inclusion_is_k_over_n() {
        let mut rng = Rng::new(22, 0);
        let (n, k, draws) = (10, 3, 10_000);
        let mut counts = vec![0usize; n];
        for _ in 0..draws {
            let s = sample_support(n, k, &vec![0.5; n], &mut rng).unwrap();
            assert_eq!(s.len(), k);
            assert!(s.windows(2).all(|w| w[0] < w[1]));
            s.into_iter().for_each(|i| counts[i] += 1);
        }
        let p = k as f64 / n as f64;
        let stderr = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() <= 3.0 * stderr);
        }
    }

    #[test]
    fn support_weighted_single_draw() {
        let mut rng = Rng::new(23, 0);
        let draws = 10_000;
        let zeros = (0..draws)
            .filter(|_| sample_support(2, 1, &[0.9, 0.1], &mut rng).unwrap() == vec![0])
            .count();
        let stderr = (0.9f64 * 0.1 / draws as f64).sqrt();
        assert!((zeros as f64 / draws as f64 - 0.9).abs() <= 3.0 * stderr);
    }

    #[test]
    fn support_full_set_is_forced() {
        let mut rng = Rng::new(24, 0);
        assert_eq!(sample_support(6, 6, &[0.5; 6], &mut rng).unwrap(), vec![0, 1, 2, 3, 4, 5]);
        assert_eq!(
            sample_support(6, 6, &[0.5, 0.6, 0.5, 0.5, 0.5, 0.5], &mut rng).unwrap(),
            vec![0, 1, 2, 3, 4, 5]
        );
        assert!(sample_support(3, 4, &[0.5; 3], &mut rng).is_err());
    }

    #[test]
    fn constant_signal_values() {
        let t = sample_signal(&SignalModel::binary(), &[2, 5], 8, &mut Rng::new(1, 1)).unwrap();
        assert_eq!(t.values(), &[1.0, 1.0]);
        assert_eq!(t.support(), &[2, 5]);
    }

    #[test]
    fn uniform_signal_range_and_mean() {
        let model = SignalModel::one_sided(NonzeroDistribution::Uniform { lo: 0.5, hi: 1.5 }, 1e-3).unwrap();
        let mut rng = Rng::new(31, 0);
        let support: Vec<usize> = (0..100).collect();
        let mut values = Vec::new();
        for _ in 0..100 {
            let t = sample_signal(&model, &support, 200, &mut rng).unwrap();
            values.extend_from_slice(t.values());
        }
        assert!(values.iter().all(|v| (0.5..=1.5).contains(v)));
        let (mean, var, n) = mean_var(values.into_iter());
        assert!((mean - 1.0).abs() <= 3.0 * (var / n as f64).sqrt());
    }

    #[test]
    fn sigma2_examples() {
        let s = sigma2_from_snr(&SignalModel::binary(), 4, 64, 10.0).unwrap();
        assert_abs_diff_eq!(s, 0.00625, epsilon = 1e-15);
        let model = SignalModel::one_sided(NonzeroDistribution::Uniform { lo: 0.5, hi: 1.5 }, 1e-3).unwrap();
        assert_abs_diff_eq!(model.second_moment(), 13.0 / 12.0, epsilon = 1e-15);
        let s = sigma2_from_snr(&model, 6, 128, 1000.0).unwrap();
        assert_abs_diff_eq!(s, 5.078125e-5, epsilon = 1e-12);
        assert!(sigma2_from_snr(&SignalModel::binary(), 4, 64, 1e12).unwrap() < 1e-12);
        assert!(sigma2_from_snr(&SignalModel::binary(), 4, 64, 0.0).is_err());
        assert_abs_diff_eq!(snr_db_to_linear(30.0), 1000.0, epsilon = 1e-9);
    }

    #[test]
    fn noise_free_measurement_is_exact() {
        let a = DMatrix::<f64>::identity(5, 5);
        let t = GroundTruth::new(vec![0], vec![1.0], 5).unwrap();
        let y = measure(&a, &t, 0.0, &mut Rng::new(1, 2)).unwrap();
        assert_eq!(y, a.column(0).into_owned());
    }

    #[test]
    fn noise_variance_matches_sigma2() {
        let a = DMatrix::<f64>::identity(4, 6);
        let t = GroundTruth::new(vec![1], vec![2.0], 6).unwrap();
        let clean = a.column(1) * 2.0;
        let sigma2 = 0.3;
        let mut rng = Rng::new(41, 0);
        let mut residuals = Vec::new();
        for _ in 0..10_000 {
            let y = measure(&a, &t, sigma2, &mut rng).unwrap();
            residuals.push(y[0] - clean[0]);
        }
        let (_, var, n) = mean_var(residuals.into_iter());
        assert!((var - sigma2).abs() <= 3.0 * sigma2 * (2.0 / (n as f64 - 1.0)).sqrt());
    }

    #[test]
    fn measurement_is_reproducible() {
        let mut r = Rng::new(3, 3);
        let a = generate_matrix(MatrixEnsemble::GaussianInvM, 6, 10, &mut r);
        let t = GroundTruth::new(vec![2, 7], vec![1.0, 1.0], 10).unwrap();
        let y1 = measure(&a, &t, 0.01, &mut Rng::new(9, 1)).unwrap();
        let y2 = measure(&a, &t, 0.01, &mut Rng::new(9, 1)).unwrap();
        assert_eq!(y1, y2);
    }

    #[test]
    fn beta_star_uniform_example() {
        let d = NonzeroDistribution::Uniform { lo: 0.5, hi: 1.5 };
        // min{2·1.5 - 2·0.999·1, 1.0}
        assert_abs_diff_eq!(beta_star_one_sided(&d, 1e-3).unwrap(), 1.0, epsilon = 1e-15);
        let closed = (2.0 * 1.5 - 2.0 * 0.999 * 1.0f64).min(1.0);
        assert_abs_diff_eq!(beta_star_one_sided(&d, 1e-3).unwrap(), closed, epsilon = 1e-15);
        // a wider law makes the quantile side bind: 2·(0.1 + 0.001·1.8)
        let wide = NonzeroDistribution::Uniform { lo: 0.1, hi: 1.9 };
        assert_abs_diff_eq!(beta_star_one_sided(&wide, 1e-3).unwrap(), 0.2036, epsilon = 1e-12);
    }

    #[test]
    fn beta_star_normal_examples() {
        let d = NonzeroDistribution::Normal { mean: 1.0, sd: 0.2 };
        let rounded = beta_star_one_sided_with(&d, 1e-3, TailRule::FixedZ(3.1)).unwrap();
        assert_abs_diff_eq!(rounded, 0.76, epsilon = 1e-12);
        let exact = beta_star_one_sided(&d, 1e-3).unwrap();
        assert_abs_diff_eq!(exact, 2.0 * (1.0 - 3.090232306167814 * 0.2), epsilon = 1e-10);
        let dispersed = NonzeroDistribution::Normal { mean: 1.0, sd: 0.4 };
        assert!(beta_star_one_sided(&dispersed, 1e-3).is_err());
        assert!(beta_star_one_sided_with(&dispersed, 1e-3, TailRule::FixedZ(3.1)).is_err());
    }

    #[test]
    fn beta_star_two_sided_examples() {
        let mix = NonzeroDistribution::SignMixture {
            p_positive: 0.5,
            positive: Box::new(NonzeroDistribution::Uniform { lo: 0.5, hi: 1.5 }),
            negative: Box::new(NonzeroDistribution::Uniform { lo: -2.5, hi: -0.5 }),
        };
        assert_abs_diff_eq!(beta_star_two_sided(&mix, 1e-3).unwrap(), 1.002, epsilon = 1e-12);
        assert_abs_diff_eq!(
            2.0 * mix.conditional_quantile(Sign::Negative, 1.0 - 1e-3),
            -1.004,
            epsilon = 1e-12
        );

        let sym = NonzeroDistribution::Uniform { lo: -1.5, hi: 1.5 };
        let b = beta_star_two_sided(&sym, 1e-3).unwrap();
        let plus = 2.0 * sym.conditional_quantile(Sign::Positive, 1e-3);
        let minus = 2.0 * sym.conditional_quantile(Sign::Negative, 1.0 - 1e-3);
        assert_abs_diff_eq!(plus, -minus, epsilon = 1e-12);
        assert_abs_diff_eq!(b, plus, epsilon = 1e-12);

        let one_sided = NonzeroDistribution::Uniform { lo: 0.5, hi: 1.5 };
        assert!(beta_star_two_sided(&one_sided, 1e-3).is_err());
    }

    #[test]
    fn signal_model_validation() {
        assert!(SignalModel::constant(0.0).is_err());
        assert!(SignalModel::one_sided(NonzeroDistribution::Uniform { lo: -1.0, hi: 1.0 }, 1e-3).is_err());
        let neg = SignalModel::one_sided(NonzeroDistribution::Uniform { lo: -1.5, hi: -0.5 }, 1e-3).unwrap();
        assert_abs_diff_eq!(neg.beta_star().unwrap(), -1.0, epsilon = 1e-15);
        assert_eq!(SignalModel::binary().beta_star().unwrap(), 1.0);
    }

    #[test]
    fn signal_model_config_shape() {
        let m: SignalModel = toml::from_str(
            r#"
kind = "one_sided"
dist = { kind = "uniform", lo = 0.5, hi = 1.5 }
"#,
        )
        .unwrap();
        assert_eq!(m.delta, DEFAULT_DELTA);
        assert_abs_diff_eq!(m.beta_star().unwrap(), 1.0, epsilon = 1e-15);
        let c: SignalModel = toml::from_str("kind = \"constant\"\nbeta = 2.0\n").unwrap();
        assert_eq!(c.beta_star().unwrap(), 2.0);
    }
}
