//! Self-checks that pit independent implementations against each other:
//! the proxy against the explicit bound, the bound against enumerated
//! posteriors, the greedy solver against the exhaustive MAP support, and the
//! analysis formulas against sampling and their own shape.

use std::fmt;

use nalgebra::DVector;
use rand::Rng as _;
use serde::Serialize;

use super::run::build_trial;
use super::spec::{AlgorithmSpec, PriorMode, SweepSpec};
use crate::ensembles::{generate_matrix, MatrixEnsemble, SignalModel};
use crate::error::Result;
use crate::model::{RecoveryProblem, SupportEstimate};
use crate::numeric::normal_cdf;
use crate::oracle::{
    exact_log_bitwise_posterior, exact_map_support, ks_critical_1pct, ks_statistic, lemma1_projection_samples,
    success_prob_lower_bound, success_prob_lower_bound_ln, success_prob_lower_bound_relaxed,
    success_prob_lower_bound_relaxed_ln, theorem1_bound, bound_terms,
};
use crate::proxy::{bmap_scores, ProxyParams};
use crate::rng::{stream_id, Rng};
use crate::solvers::{solve, Algorithm};

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        Self {
            name: name.to_owned(),
            passed,
            detail,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.passed { "PASS" } else { "FAIL" };
        write!(f, "[{tag}] {}: {}", self.name, self.detail)
    }
}

/// A random instance with `y = A_S 1 + z` under a Gaussian ensemble and,
/// every other seed, non-uniform priors.
fn tiny_instance(rng: &mut Rng, m: usize, n: usize, k: usize, sigma2: f64, skewed_priors: bool) -> Result<RecoveryProblem> {
    let a = generate_matrix(MatrixEnsemble::GaussianInvM, m, n, rng);
    let support = rand::seq::index::sample(rng, n, k).into_vec();
    let mut y = DVector::zeros(m);
    for j in support {
        y += a.column(j);
    }
    let sd = sigma2.sqrt();
    for v in y.iter_mut() {
        *v += sd * rand_distr::Distribution::<f64>::sample(&rand_distr::StandardNormal, rng);
    }
    let priors = skewed_priors.then(|| (0..n).map(|_| rng.random_range(0.2..0.8)).collect());
    RecoveryProblem::new(a, y, k, sigma2, priors)
}

fn random_given(rng: &mut Rng, n: usize, size: usize) -> Result<SupportEstimate> {
    SupportEstimate::new(rand::seq::index::sample(rng, n, size).into_vec())
}

/// Differences of the explicit bound between candidate pairs equal the
/// differences of the proxy scores. Reports the worst error relative to the
/// largest proxy magnitude of the step.
pub fn proxy_bound_identity(instances: u64, base_seed: u64) -> Result<CheckOutcome> {
    let model = SignalModel::binary();
    let mut worst: f64 = 0.0;
    let mut steps = 0usize;
    for inst in 0..instances {
        let mut rng = Rng::new(base_seed, stream_id(&[1, inst]));
        let n = rng.random_range(8..=32);
        let m = rng.random_range(4..=16usize);
        let k = rng.random_range(1..=6usize.min(n - 2));
        let sigma2 = rng.random_range(0.01..1.0);
        let p = tiny_instance(&mut rng, m, n, k, sigma2, inst % 2 == 1)?;
        let params = ProxyParams::from_problem(&p, 1.0)?;
        for step in 1..=k {
            let given = random_given(&mut rng, n, step - 1)?;
            let mut r = p.y().clone();
            for &j in given.indices() {
                r -= p.a().column(j);
            }
            let scores = bmap_scores(p.a(), &r, &given, step, &params)?;
            let cands: Vec<usize> = (0..n).filter(|j| !given.contains(*j)).collect();
            let bounds = cands
                .iter()
                .map(|&i| bound_terms(&p, &model, &given, i).map(|b| b.total))
                .collect::<Result<Vec<f64>>>()?;
            let scale = cands.iter().map(|&j| scores[j].abs()).fold(1.0, f64::max);
            // all pairs: the worst pair is the extreme of (bound - score) offsets
            let offsets: Vec<f64> = cands.iter().zip(&bounds).map(|(&j, b)| b - scores[j]).collect();
            let hi = offsets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lo = offsets.iter().copied().fold(f64::INFINITY, f64::min);
            worst = worst.max((hi - lo) / scale);
            steps += 1;
        }
    }
    Ok(CheckOutcome::new(
        "proxy/bound difference identity",
        worst <= 1e-9,
        format!("{instances} instances, {steps} steps, max relative pair error {worst:.3e} (limit 1e-9)"),
    ))
}

/// Exact log posterior plus `C1` never falls below the bound total.
pub fn jensen_bound(instances: u64, base_seed: u64) -> Result<CheckOutcome> {
    let model = SignalModel::binary();
    let mut min_slack = f64::INFINITY;
    let mut evaluations = 0usize;
    for inst in 0..instances {
        let mut rng = Rng::new(base_seed, stream_id(&[2, inst]));
        let n = rng.random_range(5..=14);
        let k = rng.random_range(1..=3usize.min(n - 2));
        let m = rng.random_range(3..=8usize);
        let sigma2 = rng.random_range(0.05..2.0);
        let p = tiny_instance(&mut rng, m, n, k, sigma2, inst % 2 == 0)?;
        for step in 1..=k {
            let given = random_given(&mut rng, n, step - 1)?;
            for i in (0..n).filter(|j| !given.contains(*j)) {
                let b = theorem1_bound(&p, &model, &given, i)?;
                let lp = exact_log_bitwise_posterior(&p, &model, &given, i)?;
                let slack = b.jensen_slack(lp).expect("constants computed");
                min_slack = min_slack.min(slack);
                evaluations += 1;
            }
        }
    }
    Ok(CheckOutcome::new(
        "bound below exact posterior",
        min_slack >= -1e-8,
        format!("{instances} instances, {evaluations} candidates, min slack {min_slack:.3e} (limit -1e-8)"),
    ))
}

/// Spec of the tiny oracle-agreement experiment.
pub fn oracle_agreement_spec(seeds: u64, base_seed: u64) -> SweepSpec {
    SweepSpec {
        n: 12,
        m: 8,
        k_values: vec![3],
        ensemble: MatrixEnsemble::GaussianInvM,
        signal: SignalModel::binary(),
        snr_db: Some(30.0),
        algorithms: vec![AlgorithmSpec::new(Algorithm::Bmap)],
        trials: seeds,
        base_seed,
        prior_mode: PriorMode::Uniform,
    }
}

/// Greedy B-MAP reproduces the exhaustive MAP support on tiny instances.
pub fn oracle_agreement(seeds: u64, base_seed: u64, threshold: f64) -> Result<CheckOutcome> {
    let spec = oracle_agreement_spec(seeds, base_seed);
    let alg = &spec.algorithms[0];
    let mut agree = 0u64;
    for t in 0..seeds {
        let inst = build_trial(&spec, 3, t)?;
        let problem = inst.problem_for(alg)?;
        let map = exact_map_support(&problem, &spec.signal)?;
        let out = solve(&problem, &spec.signal, &alg.resolve(3, &spec.signal))?;
        if out.estimate.sorted() == map {
            agree += 1;
        }
    }
    let rate = agree as f64 / seeds as f64;
    Ok(CheckOutcome::new(
        "greedy matches exhaustive MAP",
        rate >= threshold,
        format!("{agree}/{seeds} = {rate:.3} (threshold {threshold})"),
    ))
}

/// Normalised projections of Gaussian columns follow `N(0, 1/M)`.
pub fn projection_law(m: usize, n_samples: usize, base_seed: u64) -> Result<CheckOutcome> {
    let xs = lemma1_projection_samples(m, n_samples, &mut Rng::new(base_seed, stream_id(&[7])))?;
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let target_var = 1.0 / m as f64;
    let mean_se = (target_var / n).sqrt();
    let var_se = target_var * (2.0 / (n - 1.0)).sqrt();
    let sd = target_var.sqrt();
    let ks = ks_statistic(&xs, |x| normal_cdf(x / sd));
    let crit = ks_critical_1pct(xs.len());
    let mean_ok = mean.abs() <= 3.0 * mean_se;
    let var_ok = (var - target_var).abs() <= 3.0 * var_se;
    let ks_ok = ks < crit;
    Ok(CheckOutcome::new(
        "projection law N(0, 1/M)",
        mean_ok && var_ok && ks_ok,
        format!(
            "M={m}, n={n_samples}: mean {mean:.2e} (±{:.2e}), var {var:.5} vs {target_var:.5} (±{:.2e}), KS {ks:.4} < {crit:.4}",
            3.0 * mean_se,
            3.0 * var_se
        ),
    ))
}

/// The success-probability bound is at most 1, dominates its relaxed form
/// and grows with `M` (strictly once `K >= 2`; for `K = 1` the single factor
/// does not involve `M`). Growth is checked on the log scale, where it stays
/// visible even when the bound itself rounds to 1.
pub fn bound_shape() -> Result<CheckOutcome> {
    let mut points = 0usize;
    let mut problems = Vec::new();
    for &n in &[16usize, 64, 128, 256, 512] {
        for &k in &[1usize, 2, 4, 8] {
            if n <= k + 1 {
                continue;
            }
            for &s2 in &[0.0, 1e-3, 0.01, 0.1] {
                let mut prev = f64::NEG_INFINITY;
                for m in 1..=256 {
                    let prod = success_prob_lower_bound(m, n, k, s2)?;
                    let rel = success_prob_lower_bound_relaxed(m, n, k, s2)?;
                    let ln = success_prob_lower_bound_ln(m, n, k, s2)?;
                    let ln_rel = success_prob_lower_bound_relaxed_ln(m, n, k, s2)?;
                    points += 1;
                    // with K = 1 the only factor has no M-dependence; a bound of
                    // exactly 1 cannot grow either
                    let grows = ln > prev || (ln == prev && (k == 1 || ln == 0.0));
                    if !(prod <= 1.0 && rel <= prod && ln_rel <= ln && grows) {
                        problems.push(format!("N={n} K={k} s2={s2} M={m}: ln {prev} -> {ln} (relaxed {ln_rel})"));
                    }
                    prev = ln;
                }
            }
        }
    }
    let detail = match problems.first() {
        None => format!("{points} grid points: <= 1, >= relaxed form, strictly increasing in M for K >= 2"),
        Some(first) => format!("{} violations, first {first}", problems.len()),
    };
    Ok(CheckOutcome::new("success bound shape", problems.is_empty(), detail))
}

/// The suites run by `bmap verify`.
pub fn oracle_suites(base_seed: u64) -> Result<Vec<CheckOutcome>> {
    Ok(vec![
        proxy_bound_identity(100, base_seed)?,
        jensen_bound(50, base_seed)?,
        oracle_agreement(200, base_seed, ORACLE_AGREEMENT_THRESHOLD)?,
        projection_law(16, 10_000, base_seed)?,
        bound_shape()?,
    ])
}

/// Minimum agreement rate of greedy B-MAP with the exhaustive MAP support.
pub const ORACLE_AGREEMENT_THRESHOLD: f64 = 0.95;
