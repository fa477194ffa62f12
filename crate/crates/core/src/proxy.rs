//! Selection metrics for greedy support detection.
//!
//! For the `k`-th detection with previously chosen set `Î` (`|Î| = k - 1`),
//! the B-MAP proxy of a candidate column `a_j` is
//!
//! ```text
//! γ_j = (1 - λ_k)·log(p_j / (1 - p_j)) + (qᵀa_j - ½·τ·‖a_j‖²) / σ²
//! q   = β(1 - λ_k)·r - β²·λ_k(1 - λ_{k+1})·A_{∖Î}·1
//! τ   = β²·(1 - 3λ_k + 2λ_kλ_{k+1})
//! ```
//!
//! with `λ_k = (K - k)/(N - k)`. It is a lower bound on the bit-wise log
//! posterior up to a `j`-independent constant, so only differences between
//! candidates carry meaning.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::{priors_uniform, RecoveryProblem, SupportEstimate};
use crate::numeric::logit;

/// `λ_k = (K - k)/(N - k)`; `k = K + 1` is accepted and yields a negative value.
pub fn lambda_k(k_sparsity: usize, n: usize, k: usize) -> f64 {
    debug_assert!(k >= 1 && k <= k_sparsity + 1 && n > k);
    (k_sparsity as f64 - k as f64) / (n as f64 - k as f64)
}

#[derive(Debug, Clone)]
pub struct ProxyParams {
    pub beta_star: f64,
    pub sigma2: f64,
    pub priors: Vec<f64>,
    pub k_sparsity: usize,
    pub n: usize,
}

impl ProxyParams {
    pub fn new(beta_star: f64, sigma2: f64, priors: Vec<f64>, k_sparsity: usize, n: usize) -> Result<Self> {
        if !(beta_star.is_finite() && beta_star != 0.0) {
            return Err(Error::InvalidParameter(format!("beta* = {beta_star} must be finite and nonzero")));
        }
        if k_sparsity == 0 || k_sparsity + 1 >= n {
            return Err(Error::InvalidParameter(format!("need 1 <= K < N - 1, got K = {k_sparsity}, N = {n}")));
        }
        if priors.len() != n {
            return Err(Error::Dimension(format!("{} priors for N = {n}", priors.len())));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidParameter(format!("sigma2 = {sigma2}")));
        }
        if sigma2 == 0.0 && !priors_uniform(&priors) {
            return Err(Error::NoiseFreeWithPriors);
        }
        Ok(Self {
            beta_star,
            sigma2,
            priors,
            k_sparsity,
            n,
        })
    }

    pub fn from_problem(problem: &RecoveryProblem, beta_star: f64) -> Result<Self> {
        Self::new(beta_star, problem.sigma2(), problem.priors().to_vec(), problem.k(), problem.n())
    }

    /// `1/σ²`, or 1 in the noise-free case where the factor is a common
    /// positive scaling of every candidate.
    fn likelihood_scale(&self) -> f64 {
        if self.sigma2 > 0.0 {
            1.0 / self.sigma2
        } else {
            1.0
        }
    }
}

/// Squared column norms `‖a_j‖²`.
pub fn column_norms_squared(a: &DMatrix<f64>) -> Vec<f64> {
    a.column_iter().map(|c| c.norm_squared()).collect()
}

/// `A·1`.
pub fn column_sum(a: &DMatrix<f64>) -> DVector<f64> {
    let mut s = DVector::zeros(a.nrows());
    for c in a.column_iter() {
        s += c;
    }
    s
}

/// Proxy evaluation with the column statistics of `A` cached.
///
/// Scores are produced for every column; callers mask the ones already
/// selected when that matters.
#[derive(Debug)]
pub struct BmapProxy<'a> {
    a: &'a DMatrix<f64>,
    params: ProxyParams,
    col_norms2: Vec<f64>,
    logits: Vec<f64>,
}

impl<'a> BmapProxy<'a> {
    pub fn new(a: &'a DMatrix<f64>, params: ProxyParams) -> Result<Self> {
        if a.ncols() != params.n {
            return Err(Error::Dimension(format!("A has {} columns, params N = {}", a.ncols(), params.n)));
        }
        Ok(Self {
            a,
            col_norms2: column_norms_squared(a),
            logits: params.priors.iter().map(|&p| logit(p)).collect(),
            params,
        })
    }

    pub fn params(&self) -> &ProxyParams {
        &self.params
    }

    /// Scores at iteration `k` for amplitude `beta` (pass `-β*` for the
    /// negative branch). `unselected_colsum` is `A_{∖Î}·1`.
    pub fn scores(&self, r: &DVector<f64>, unselected_colsum: &DVector<f64>, k: usize, beta: f64) -> Vec<f64> {
        let p = &self.params;
        let lam = lambda_k(p.k_sparsity, p.n, k);
        let lam_next = lambda_k(p.k_sparsity, p.n, k + 1);
        self.scores_with_lambdas(r, unselected_colsum, lam, lam_next, beta)
    }

    pub(crate) fn scores_with_lambdas(
        &self,
        r: &DVector<f64>,
        unselected_colsum: &DVector<f64>,
        lam: f64,
        lam_next: f64,
        beta: f64,
    ) -> Vec<f64> {
        let q = r * (beta * (1.0 - lam)) - unselected_colsum * (beta * beta * lam * (1.0 - lam_next));
        let tau = beta * beta * (1.0 - 3.0 * lam + 2.0 * lam * lam_next);
        let corr = self.a.tr_mul(&q);
        let scale = self.params.likelihood_scale();
        let prior_weight = 1.0 - lam;
        corr.iter()
            .zip(&self.col_norms2)
            .zip(&self.logits)
            .map(|((c, n2), lg)| prior_weight * lg + scale * (c - 0.5 * tau * n2))
            .collect()
    }

    /// `max{γ_j(β*), γ_j(-β*)}` together with the sign of the winning branch
    /// (`+1` on ties).
    pub fn scores_two_sided(
        &self,
        r: &DVector<f64>,
        unselected_colsum: &DVector<f64>,
        k: usize,
    ) -> (Vec<f64>, Vec<f64>) {
        let b = self.params.beta_star.abs();
        let plus = self.scores(r, unselected_colsum, k, b);
        let minus = self.scores(r, unselected_colsum, k, -b);
        plus.into_iter()
            .zip(minus)
            .map(|(p, m)| if m > p { (m, -1.0) } else { (p, 1.0) })
            .unzip()
    }
}

fn check_call(a: &DMatrix<f64>, r: &DVector<f64>, selected: &SupportEstimate, k: usize, params: &ProxyParams) -> Result<()> {
    if r.len() != a.nrows() {
        return Err(Error::Dimension(format!("residual length {} vs M = {}", r.len(), a.nrows())));
    }
    selected.check_bounds(a.ncols())?;
    if k != selected.len() + 1 || k > params.k_sparsity {
        return Err(Error::InvalidParameter(format!(
            "iteration k = {k} must equal |selected| + 1 = {} and be <= K = {}",
            selected.len() + 1,
            params.k_sparsity
        )));
    }
    Ok(())
}

fn unselected_colsum(a: &DMatrix<f64>, selected: &SupportEstimate) -> DVector<f64> {
    let mut s = column_sum(a);
    for &j in selected.indices() {
        s -= a.column(j);
    }
    s
}

fn mask_selected(mut scores: Vec<f64>, selected: &SupportEstimate) -> Vec<f64> {
    for &j in selected.indices() {
        scores[j] = f64::NEG_INFINITY;
    }
    scores
}

/// One-sided B-MAP proxy for every candidate `j ∉ selected`.
///
/// The returned vector has length `N`; already selected indices hold `-∞`.
pub fn bmap_scores(
    a: &DMatrix<f64>,
    r: &DVector<f64>,
    selected: &SupportEstimate,
    k: usize,
    params: &ProxyParams,
) -> Result<Vec<f64>> {
    check_call(a, r, selected, k, params)?;
    let proxy = BmapProxy::new(a, params.clone())?;
    let colsum = unselected_colsum(a, selected);
    Ok(mask_selected(proxy.scores(r, &colsum, k, params.beta_star), selected))
}

/// Two-sided B-MAP proxy `max{γ_j(β*), γ_j(-β*)}`; same layout as [`bmap_scores`].
pub fn bmap_scores_two_sided(
    a: &DMatrix<f64>,
    r: &DVector<f64>,
    selected: &SupportEstimate,
    k: usize,
    params: &ProxyParams,
) -> Result<Vec<f64>> {
    check_call(a, r, selected, k, params)?;
    let proxy = BmapProxy::new(a, params.clone())?;
    let colsum = unselected_colsum(a, selected);
    Ok(mask_selected(proxy.scores_two_sided(r, &colsum, k).0, selected))
}

/// OMP proxy `|a_jᵀ r|`.
pub fn omp_scores(a: &DMatrix<f64>, r: &DVector<f64>) -> Result<Vec<f64>> {
    if r.len() != a.nrows() {
        return Err(Error::Dimension(format!("residual length {} vs M = {}", r.len(), a.nrows())));
    }
    Ok(a.tr_mul(r).iter().map(|v| v.abs()).collect())
}

/// Index of the largest finite score; ties go to the lowest index.
pub fn argmax(scores: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, &s) in scores.iter().enumerate() {
        if s.is_nan() || s == f64::NEG_INFINITY {
            continue;
        }
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((j, s));
        }
    }
    best.map(|(j, _)| j)
}

/// The `l` largest scores, ties broken by lower index. Result is in rank order.
pub fn top_indices(scores: &[f64], l: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).filter(|&j| !scores[j].is_nan()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]).then(i.cmp(&j)));
    idx.truncate(l);
    idx
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensembles::{generate_matrix, MatrixEnsemble};
    use crate::rng::Rng;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn uniform_params(beta: f64, sigma2: f64, k: usize, n: usize) -> ProxyParams {
        ProxyParams::new(beta, sigma2, vec![0.5; n], k, n).unwrap()
    }

    #[test]
    fn lambda_examples() {
        assert_abs_diff_eq!(lambda_k(2, 4, 1), 1.0 / 3.0);
        assert_eq!(lambda_k(3, 10, 3), 0.0);
        assert_abs_diff_eq!(lambda_k(2, 8, 3), -0.2);
    }

    #[test]
    fn identity_instance_scores() {
        let a = DMatrix::<f64>::identity(4, 4);
        let r = DVector::from_vec(vec![1.0, 0.0, 0.0, 0.0]);
        let params = uniform_params(1.0, 1.0, 1, 4);
        let s = bmap_scores(&a, &r, &SupportEstimate::empty(), 1, &params).unwrap();
        for (got, want) in s.iter().zip([0.5, -0.5, -0.5, -0.5]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-15);
        }
        assert_eq!(argmax(&s), Some(0));
    }

    #[test]
    fn prior_term_contribution() {
        // K = 2, N = 4, k = 1: λ₁ = 1/3
        let a = DMatrix::<f64>::identity(3, 4);
        let r = DVector::from_vec(vec![0.3, -0.2, 0.1]);
        let mut priors = vec![0.5; 4];
        priors[2] = 0.55;
        let with = ProxyParams::new(1.0, 0.5, priors, 2, 4).unwrap();
        let without = uniform_params(1.0, 0.5, 2, 4);
        let s1 = bmap_scores(&a, &r, &SupportEstimate::empty(), 1, &with).unwrap();
        let s0 = bmap_scores(&a, &r, &SupportEstimate::empty(), 1, &without).unwrap();
        // exact value 0.1337805; the commonly quoted 0.13377 is one unit off in the last digit
        assert_abs_diff_eq!(s1[2] - s0[2], 0.13377, epsilon = 2e-5);
        assert_abs_diff_eq!(s1[2] - s0[2], (2.0 / 3.0) * (0.55f64 / 0.45).ln(), epsilon = 1e-14);
        assert_eq!(s1[0], s0[0]);
    }

    #[test]
    fn selected_candidates_are_masked() {
        let mut rng = Rng::new(1, 1);
        let a = generate_matrix(MatrixEnsemble::GaussianInvM, 6, 10, &mut rng);
        let r = DVector::from_fn(6, |i, _| i as f64 * 0.1);
        let params = uniform_params(1.0, 0.1, 3, 10);
        let sel = SupportEstimate::new(vec![4, 1]).unwrap();
        let s = bmap_scores(&a, &r, &sel, 3, &params).unwrap();
        assert_eq!(s[1], f64::NEG_INFINITY);
        assert_eq!(s[4], f64::NEG_INFINITY);
        assert!(s.iter().enumerate().all(|(j, v)| sel.contains(j) || v.is_finite()));
        assert!(bmap_scores(&a, &r, &sel, 2, &params).is_err());
        assert!(bmap_scores(&a, &DVector::zeros(5), &sel, 3, &params).is_err());
    }

    #[test]
    fn noise_free_requires_uniform_priors() {
        let mut p = vec![0.5; 6];
        p[0] = 0.55;
        assert!(matches!(ProxyParams::new(1.0, 0.0, p, 2, 6), Err(Error::NoiseFreeWithPriors)));
        assert!(ProxyParams::new(1.0, 0.0, vec![0.5; 6], 2, 6).is_ok());
        assert!(ProxyParams::new(0.0, 1.0, vec![0.5; 6], 2, 6).is_err());
        assert!(ProxyParams::new(1.0, 1.0, vec![0.5; 6], 5, 6).is_err());
    }

    #[test]
    fn last_iteration_ignores_next_lambda() {
        let mut rng = Rng::new(2, 2);
        let (m, n, k) = (8, 16, 3);
        let a = generate_matrix(MatrixEnsemble::GaussianInvM, m, n, &mut rng);
        let r = DVector::from_fn(m, |i, _| (i as f64).sin());
        let params = uniform_params(1.3, 0.2, k, n);
        let proxy = BmapProxy::new(&a, params.clone()).unwrap();
        let colsum = column_sum(&a) - a.column(0) - a.column(5);
        let literal = proxy.scores(&r, &colsum, k, 1.3);
        let lam_k = lambda_k(k, n, k);
        assert_eq!(lam_k, 0.0);
        let zeroed = proxy.scores_with_lambdas(&r, &colsum, lam_k, 0.0, 1.3);
        assert!(lambda_k(k, n, k + 1) < 0.0);
        for (x, y) in literal.iter().zip(&zeroed) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn omp_examples() {
        let a = DMatrix::<f64>::identity(4, 6);
        let r = a.column(0).into_owned();
        let s = omp_scores(&a, &r).unwrap();
        assert_eq!(s, vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(omp_scores(&a, &DVector::zeros(4)).unwrap().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_sided_branches_coincide_when_odd_terms_vanish() {
        // r ⊥ a_j and A_{∖Î}1 ⊥ a_j: both branches reduce to -½τ‖a_j‖²/σ²
        let a = DMatrix::<f64>::identity(4, 6);
        let r = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
        let params = uniform_params(1.0, 1.0, 2, 6);
        let proxy = BmapProxy::new(&a, params.clone()).unwrap();
        let colsum = DVector::from_vec(vec![0.0, 0.0, 0.0, 1.0]);
        let plus = proxy.scores(&r, &colsum, 1, 1.0);
        let minus = proxy.scores(&r, &colsum, 1, -1.0);
        let (both, _) = proxy.scores_two_sided(&r, &colsum, 1);
        for j in [0, 1, 2, 4, 5] {
            assert_abs_diff_eq!(plus[j], minus[j], epsilon = 1e-15);
            assert_abs_diff_eq!(both[j], plus[j], epsilon = 1e-15);
        }
    }

    #[test]
    fn two_sided_sign_flip_invariance() {
        for seed in 0..20 {
            let mut rng = Rng::new(seed, 9);
            let (m, n, k) = (10, 20, 3);
            let a = generate_matrix(MatrixEnsemble::GaussianInvM, m, n, &mut rng);
            let x = DVector::from_fn(n, |j, _| if j % 7 == 2 { 1.0 + 0.1 * j as f64 } else { 0.0 });
            let y = &a * &x;
            let params = uniform_params(1.0, 0.05, k, n);
            let sel = SupportEstimate::empty();
            let s = bmap_scores_two_sided(&a, &y, &sel, 1, &params).unwrap();
            let s_flip = bmap_scores_two_sided(&a, &(-&y), &sel, 1, &params).unwrap();
            for (u, v) in s.iter().zip(&s_flip) {
                assert_abs_diff_eq!(u, v, epsilon = 1e-9 * u.abs().max(1.0));
            }
            let proxy = BmapProxy::new(&a, params.clone()).unwrap();
            let colsum = column_sum(&a);
            let (_, signs) = proxy.scores_two_sided(&y, &colsum, 1);
            let (_, signs_flip) = proxy.scores_two_sided(&(-&y), &colsum, 1);
            // wherever one branch strictly wins, flipping swaps the winner
            let plus = proxy.scores(&y, &colsum, 1, 1.0);
            let minus = proxy.scores(&y, &colsum, 1, -1.0);
            for j in 0..n {
                if (plus[j] - minus[j]).abs() > 1e-9 {
                    assert_eq!(signs[j], -signs_flip[j]);
                }
            }
        }
    }

    #[test]
    fn two_sided_agrees_with_one_sided_on_positive_truth() {
        let mut agree = 0;
        for seed in 0..50 {
            let mut rng = Rng::new(seed, 4);
            let (m, n, k) = (20, 40, 3);
            let a = generate_matrix(MatrixEnsemble::GaussianInvM, m, n, &mut rng);
            let y = a.column(3) + a.column(17) + a.column(30);
            let params = uniform_params(1.0, 0.0, k, n);
            let sel = SupportEstimate::empty();
            let one = bmap_scores(&a, &y, &sel, 1, &params).unwrap();
            let two = bmap_scores_two_sided(&a, &y, &sel, 1, &params).unwrap();
            if argmax(&one) == argmax(&two) {
                agree += 1;
            }
        }
        // a strongly anti-correlated column can occasionally win the negative branch
        assert!(agree >= 45, "{agree}/50");
    }

    #[test]
    fn ranking_helpers() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, f64::NEG_INFINITY]), Some(1));
        assert_eq!(argmax(&[f64::NEG_INFINITY]), None);
        assert_eq!(top_indices(&[0.1, 0.5, 0.5, 0.9], 3), vec![3, 1, 2]);
    }

    proptest! {
        #[test]
        fn sigma2_scaling_keeps_argmax(seed in 0u64..500, c in 0.01f64..100.0) {
            let mut rng = Rng::new(seed, 1);
            let (m, n, k) = (8, 16, 3);
            let a = generate_matrix(MatrixEnsemble::GaussianInvM, m, n, &mut rng);
            let r = a.column(2) + a.column(9) * 0.7;
            let sel = SupportEstimate::new(vec![5]).unwrap();
            let s1 = bmap_scores(&a, &r, &sel, 2, &uniform_params(1.0, 0.3, k, n)).unwrap();
            let s2 = bmap_scores(&a, &r, &sel, 2, &uniform_params(1.0, 0.3 * c, k, n)).unwrap();
            prop_assert_eq!(argmax(&s1), argmax(&s2));
        }

        #[test]
        fn amplitude_homogeneity_keeps_argmax(seed in 0u64..500, c in 0.1f64..10.0) {
            let mut rng = Rng::new(seed, 2);
            let (m, n, k) = (8, 16, 3);
            let a = generate_matrix(MatrixEnsemble::UniformSym, m, n, &mut rng);
            let r = a.column(2) * 1.1 + a.column(11) * 0.9;
            let sel = SupportEstimate::new(vec![7]).unwrap();
            let s1 = bmap_scores(&a, &r, &sel, 2, &uniform_params(1.0, 0.2, k, n)).unwrap();
            let s2 = bmap_scores(&a, &(r * c), &sel, 2, &uniform_params(c, 0.2 * c * c, k, n)).unwrap();
            prop_assert_eq!(argmax(&s1), argmax(&s2));
        }

        #[test]
        fn omp_sign_invariant(seed in 0u64..500) {
            let mut rng = Rng::new(seed, 3);
            let a = generate_matrix(MatrixEnsemble::GaussianInvM, 6, 12, &mut rng);
            let r = DVector::from_fn(6, |i, _| (i as f64 + seed as f64).cos());
            prop_assert_eq!(omp_scores(&a, &r).unwrap(), omp_scores(&a, &(-r.clone())).unwrap());
        }
    }
}
