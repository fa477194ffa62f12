//! Brute-force references for tiny instances and closed-form analysis
//! formulas.
//!
//! All enumerations work on log weights
//!
//! ```text
//! w(u) = log p(u) - ‖y - β·A·u‖² / (2σ²)
//! ```
//!
//! where `p(u) = ∏ p_j^{u_j} (1 - p_j)^{1 - u_j}` restricted to `|u| = K`.
//! Normalising the product form over the constraint set only adds a
//! `u`-independent constant, so posteriors and MAP supports are exact.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::ensembles::SignalModel;
use crate::error::{Error, Result};
use crate::model::{kl_bernoulli, RecoveryProblem, SupportEstimate};
use crate::numeric::{binary_entropy, binomial, ln_binomial, LogSumExp};
use crate::proxy::lambda_k;
use crate::rng::Rng;

/// Largest number of supports any enumeration will visit.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

/// Constants closing the gap between the bound and the exact bit-wise log
/// posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct JensenConstants {
    /// `log P(Î ⊂ S | y, A)`.
    pub d1: f64,
    /// `log Σ_u p(u) f(y|u) - log |Ω_I|` with the product prior.
    pub d2: f64,
    /// `(N - k)·H₂(λ_k)`.
    pub d3: f64,
    /// `M/2·log(2πσ²) + ‖r‖²/(2σ²)`.
    pub d4: f64,
    pub c1: f64,
}

/// Terms of the iteration-`k` lower bound on the bit-wise log posterior.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundBreakdown {
    pub kl_sum: f64,
    pub likelihood_term: f64,
    pub trace_term: f64,
    pub total: f64,
    /// Present when computed by [`theorem1_bound`]; the enumeration behind
    /// `D1` and `D2` is skipped by [`bound_terms`].
    pub constants: Option<JensenConstants>,
}

impl BoundBreakdown {
    /// `log P(i_k | Î, y) + C1 - total`; never negative up to rounding.
    pub fn jensen_slack(&self, exact_log_posterior: f64) -> Option<f64> {
        self.constants.map(|c| exact_log_posterior + c.c1 - self.total)
    }
}

fn constant_beta(model: &SignalModel) -> Result<f64> {
    if !model.is_constant() {
        return Err(Error::InvalidParameter(format!(
            "oracle needs a constant-amplitude model, got {}",
            model.label()
        )));
    }
    model.beta_star()
}

fn require_noise(problem: &RecoveryProblem) -> Result<()> {
    if problem.sigma2() > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter("posterior enumeration needs sigma2 > 0".into()))
    }
}

fn guard(count: u128) -> Result<()> {
    if count > ENUMERATION_LIMIT {
        Err(Error::TooLarge {
            subsets: count,
            limit: ENUMERATION_LIMIT,
        })
    } else {
        Ok(())
    }
}

/// Log prior (product form) and squared residual of one support.
struct Scorer<'a> {
    problem: &'a RecoveryProblem,
    beta: f64,
    log_p: Vec<f64>,
    log_q: Vec<f64>,
}

impl<'a> Scorer<'a> {
    fn new(problem: &'a RecoveryProblem, beta: f64) -> Self {
        Self {
            problem,
            beta,
            log_p: problem.priors().iter().map(|p| p.ln()).collect(),
            log_q: problem.priors().iter().map(|p| (1.0 - p).ln()).collect(),
        }
    }

    fn residual_sq(&self, support: &[usize]) -> f64 {
        let a = self.problem.a();
        let mut r = self.problem.y().clone();
        for &j in support {
            r.axpy(-self.beta, &a.column(j), 1.0);
        }
        r.norm_squared()
    }

    fn log_prior(&self, support: &[usize]) -> f64 {
        let base: f64 = self.log_q.iter().sum();
        base + support.iter().map(|&j| self.log_p[j] - self.log_q[j]).sum::<f64>()
    }

    /// `log p(u) + log f(y|u)` including the Gaussian normalisation.
    fn log_joint(&self, support: &[usize]) -> f64 {
        let s2 = self.problem.sigma2();
        let m = self.problem.m() as f64;
        self.log_prior(support) - 0.5 * m * (2.0 * std::f64::consts::PI * s2).ln()
            - self.residual_sq(support) / (2.0 * s2)
    }

    /// `log Σ_{u ⊇ fixed, |u| = K} p(u) f(y|u)`.
    fn log_mass(&self, fixed: &[usize]) -> Result<f64> {
        let n = self.problem.n();
        let k = self.problem.k();
        if fixed.len() > k {
            return Ok(f64::NEG_INFINITY);
        }
        let free: Vec<usize> = (0..n).filter(|j| !fixed.contains(j)).collect();
        guard(binomial(free.len(), k - fixed.len()))?;
        let mut acc = LogSumExp::default();
        let mut support = fixed.to_vec();
        for extra in free.into_iter().combinations(k - fixed.len()) {
            support.truncate(fixed.len());
            support.extend(extra);
            acc.push(self.log_joint(&support));
        }
        Ok(acc.value())
    }
}

/// Support of size `K` maximising the exact posterior `P(S = I | y, A)`.
///
/// Noise-free problems (uniform priors) reduce to the smallest residual.
/// Ties resolve to the lexicographically first support.
pub fn exact_map_support(problem: &RecoveryProblem, model: &SignalModel) -> Result<Vec<usize>> {
    let beta = constant_beta(model)?;
    let (n, k) = (problem.n(), problem.k());
    guard(binomial(n, k))?;
    let scorer = Scorer::new(problem, beta);
    let mut best = (f64::NEG_INFINITY, Vec::new());
    for support in (0..n).combinations(k) {
        let score = if problem.sigma2() > 0.0 {
            scorer.log_joint(&support)
        } else {
            -scorer.residual_sq(&support)
        };
        if score > best.0 {
            best = (score, support);
        }
    }
    Ok(best.1)
}

/// `P(i ∈ S | Î ⊂ S, y, A)` by enumeration.
pub fn exact_bitwise_posterior(
    problem: &RecoveryProblem,
    model: &SignalModel,
    given: &SupportEstimate,
    i: usize,
) -> Result<f64> {
    exact_log_bitwise_posterior(problem, model, given, i).map(f64::exp)
}

/// Natural log of [`exact_bitwise_posterior`].
pub fn exact_log_bitwise_posterior(
    problem: &RecoveryProblem,
    model: &SignalModel,
    given: &SupportEstimate,
    i: usize,
) -> Result<f64> {
    let beta = constant_beta(model)?;
    require_noise(problem)?;
    given.check_bounds(problem.n())?;
    if i >= problem.n() {
        return Err(Error::Dimension(format!("candidate {i} outside [0, {})", problem.n())));
    }
    if given.contains(i) {
        return Ok(0.0);
    }
    let scorer = Scorer::new(problem, beta);
    let mut with_i = given.indices().to_vec();
    with_i.push(i);
    Ok(scorer.log_mass(&with_i)? - scorer.log_mass(given.indices())?)
}

/// The iteration-`k` lower bound (`k = |given| + 1`) for candidate `i_k`
/// together with the constants `D1..D4`, which need enumeration over all
/// `K`-subsets.
pub fn theorem1_bound(
    problem: &RecoveryProblem,
    model: &SignalModel,
    given: &SupportEstimate,
    i_k: usize,
) -> Result<BoundBreakdown> {
    bound_impl(problem, model, given, i_k, true)
}

/// [`theorem1_bound`] without the constants; no enumeration.
pub fn bound_terms(
    problem: &RecoveryProblem,
    model: &SignalModel,
    given: &SupportEstimate,
    i_k: usize,
) -> Result<BoundBreakdown> {
    bound_impl(problem, model, given, i_k, false)
}

/// Evaluated term by term with an explicit `R` matrix.
fn bound_impl(
    problem: &RecoveryProblem,
    model: &SignalModel,
    given: &SupportEstimate,
    i_k: usize,
    with_constants: bool,
) -> Result<BoundBreakdown> {
    let beta = constant_beta(model)?;
    require_noise(problem)?;
    let (n, m, big_k) = (problem.n(), problem.m(), problem.k());
    given.check_bounds(n)?;
    if i_k >= n || given.contains(i_k) {
        return Err(Error::InvalidParameter(format!("candidate {i_k} must be an unselected index")));
    }
    let k = given.len() + 1;
    if k > big_k {
        return Err(Error::InvalidParameter(format!("{} indices already selected with K = {big_k}", given.len())));
    }
    let s2 = problem.sigma2();
    let a = problem.a();
    let lam = lambda_k(big_k, n, k);
    let lam_next = if k < big_k { lambda_k(big_k, n, k + 1) } else { 0.0 };

    let mut r = problem.y().clone();
    for &j in given.indices() {
        r.axpy(-beta, &a.column(j), 1.0);
    }

    let mut kl_sum = 0.0;
    for (j, &p) in problem.priors().iter().enumerate() {
        let alpha = if j == i_k || given.contains(j) { 1.0 } else { lam };
        kl_sum -= kl_bernoulli(alpha, p)?;
    }

    let unselected: Vec<usize> = (0..n).filter(|&j| !given.contains(j)).collect();
    let mut direction = a.column(i_k).into_owned();
    for &j in unselected.iter().filter(|&&j| j != i_k) {
        direction.axpy(lam, &a.column(j), 1.0);
    }
    let likelihood_term = beta / s2 * direction.dot(&r);

    let a_u = a.select_columns(&unselected);
    let q = a_u.tr_mul(&a_u);
    let size = unselected.len();
    let pos = unselected.iter().position(|&j| j == i_k).expect("i_k is unselected");
    let r_mat = DMatrix::from_fn(size, size, |u, v| {
        if u == pos && v == pos {
            1.0
        } else if u == pos || v == pos || u == v {
            lam
        } else {
            lam * lam_next
        }
    });
    let trace = q.component_mul(&r_mat.transpose()).sum();
    let trace_term = -beta * beta / (2.0 * s2) * trace;

    let constants = if with_constants {
        let scorer = Scorer::new(problem, beta);
        let all = scorer.log_mass(&[])?;
        let d1 = scorer.log_mass(given.indices())? - all;
        let d2 = all - ln_binomial(n - k, big_k - k);
        let d3 = (n - k) as f64 * binary_entropy(lam);
        let d4 = 0.5 * m as f64 * (2.0 * std::f64::consts::PI * s2).ln() + r.norm_squared() / (2.0 * s2);
        Some(JensenConstants {
            d1,
            d2,
            d3,
            d4,
            c1: d1 + d2 + d3 + d4,
        })
    } else {
        None
    };

    Ok(BoundBreakdown {
        kl_sum,
        likelihood_term,
        trace_term,
        total: kl_sum + likelihood_term + trace_term,
        constants,
    })
}

fn log1m_exp_neg(x: f64) -> f64 {
    // log(1 - e^{-x}) for x > 0
    if x > std::f64::consts::LN_2 {
        (-(-x).exp()).ln_1p()
    } else {
        (-(-x).exp_m1()).ln()
    }
}

fn check_bound_args(m: usize, n: usize, k: usize, sigma2: f64) -> Result<()> {
    if m == 0 || k == 0 || n <= k + 1 || !(sigma2 >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bound needs M >= 1, K >= 1, N > K + 1, sigma2 >= 0 (M={m}, N={n}, K={k}, sigma2={sigma2})"
        )));
    }
    Ok(())
}

/// Product-form lower bound on the probability that greedy B-MAP recovers
/// the support of a binary signal under a Gaussian ensemble:
///
/// ```text
/// ∏_{k=1}^{K} (1 - exp(-M / (4(Mσ² + (K-k)(N-K-1)/(N-k-1)))))^{N-K}
/// ```
///
/// A factor whose denominator vanishes is exactly 1.
pub fn success_prob_lower_bound(m: usize, n: usize, k: usize, sigma2: f64) -> Result<f64> {
    success_prob_lower_bound_ln(m, n, k, sigma2).map(f64::exp)
}

/// Natural log of [`success_prob_lower_bound`]; keeps resolution where the
/// bound is within rounding of 0 or 1.
pub fn success_prob_lower_bound_ln(m: usize, n: usize, k: usize, sigma2: f64) -> Result<f64> {
    check_bound_args(m, n, k, sigma2)?;
    let mf = m as f64;
    let mut log_bound = 0.0;
    for step in 1..=k {
        let c = (k - step) as f64 * (n - k - 1) as f64 / (n - step - 1) as f64;
        let exponent = exponent(mf, sigma2, c);
        if exponent.is_finite() {
            log_bound += (n - k) as f64 * log1m_exp_neg(exponent);
        }
    }
    Ok(log_bound)
}

/// `(1 - exp(-M / (4(Mσ² + K - 1))))^{K(N-K)}`, never above the product form.
pub fn success_prob_lower_bound_relaxed(m: usize, n: usize, k: usize, sigma2: f64) -> Result<f64> {
    success_prob_lower_bound_relaxed_ln(m, n, k, sigma2).map(f64::exp)
}

pub fn success_prob_lower_bound_relaxed_ln(m: usize, n: usize, k: usize, sigma2: f64) -> Result<f64> {
    check_bound_args(m, n, k, sigma2)?;
    let exponent = exponent(m as f64, sigma2, (k - 1) as f64);
    if !exponent.is_finite() {
        return Ok(0.0);
    }
    Ok((k * (n - k)) as f64 * log1m_exp_neg(exponent))
}

/// `M / (4(Mσ² + c))`, with the `c = 0` case reduced to `1/(4σ²)` so it is
/// exactly independent of `M`; infinite when the denominator vanishes.
fn exponent(m: f64, sigma2: f64, c: f64) -> f64 {
    if c == 0.0 {
        if sigma2 == 0.0 {
            f64::INFINITY
        } else {
            1.0 / (4.0 * sigma2)
        }
    } else {
        m / (4.0 * (m * sigma2 + c))
    }
}

/// `⌈c·(1 + 1/δ)·K·ln N⌉`. An infinite `δ` gives the noise-free count.
pub fn measurement_scaling(n: usize, k: usize, delta_snr: f64, c: f64) -> Result<usize> {
    if !(delta_snr > 0.0) || !(c > 0.0 && c.is_finite()) || n < 2 {
        return Err(Error::InvalidParameter(format!(
            "need delta_snr > 0, finite c > 0, N >= 2 (delta_snr={delta_snr}, c={c}, N={n})"
        )));
    }
    let v = c * (1.0 + 1.0 / delta_snr) * k as f64 * (n as f64).ln();
    Ok(v.ceil() as usize)
}

/// Draws of `a_ℓᵀ(a_i - a_j)/‖a_i - a_j‖` for fresh columns with i.i.d.
/// `N(0, 1/M)` entries.
pub fn lemma1_projection_samples(m: usize, n_samples: usize, rng: &mut Rng) -> Result<Vec<f64>> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("M = {m}, need at least 2")));
    }
    let normal = Normal::new(0.0, 1.0 / (m as f64).sqrt()).expect("valid sd");
    let draw = |rng: &mut Rng| DVector::from_fn(m, |_, _| normal.sample(rng));
    Ok((0..n_samples)
        .map(|_| {
            let (ai, aj, al) = (draw(rng), draw(rng), draw(rng));
            let d = ai - aj;
            al.dot(&d) / d.norm()
        })
        .collect())
}

/// Two-sided Kolmogorov–Smirnov distance between the empirical law of
/// `samples` and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `c(α)/√n`; `c = 1.628` at the 1% level.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}
