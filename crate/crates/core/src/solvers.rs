//! Recovery algorithms.
//!
//! Greedy solvers ([`Algorithm::Bmap`], [`Algorithm::Omp`]) add one index per
//! iteration and stop after exactly `K` selections. Iterative solvers
//! (CoSaMP / SP and their B-MAP counterparts) identify a candidate batch,
//! merge, fit, prune back to `K` and repeat until the stopping rule fires,
//! returning the support with the smallest residual seen.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::ensembles::SignalModel;
use crate::error::{Error, Result};
use crate::lsq::{least_squares, residual};
use crate::model::{RecoveryProblem, SupportEstimate};
use crate::proxy::{argmax, column_sum, omp_scores, top_indices, BmapProxy, ProxyParams};

/// Iterative solvers stop once the residual norm fails to shrink by this
/// relative amount.
pub const STALL_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    #[serde(rename = "BMAP")]
    Bmap,
    #[serde(rename = "BCoSaMP")]
    BCoSaMP,
    #[serde(rename = "BSP")]
    Bsp,
    #[serde(rename = "OMP")]
    Omp,
    #[serde(rename = "CoSaMP")]
    CoSaMP,
    #[serde(rename = "SP")]
    Sp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 6] = [
        Algorithm::Bmap,
        Algorithm::BCoSaMP,
        Algorithm::Bsp,
        Algorithm::Omp,
        Algorithm::CoSaMP,
        Algorithm::Sp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Bmap => "BMAP",
            Algorithm::BCoSaMP => "BCoSaMP",
            Algorithm::Bsp => "BSP",
            Algorithm::Omp => "OMP",
            Algorithm::CoSaMP => "CoSaMP",
            Algorithm::Sp => "SP",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|a| a.name().eq_ignore_ascii_case(name))
    }

    pub fn is_greedy(self) -> bool {
        matches!(self, Algorithm::Bmap | Algorithm::Omp)
    }

    pub fn uses_bmap_proxy(self) -> bool {
        matches!(self, Algorithm::Bmap | Algorithm::BCoSaMP | Algorithm::Bsp)
    }

    /// Whether a least-squares refit follows pruning.
    fn refits_after_prune(self) -> bool {
        matches!(self, Algorithm::Bsp | Algorithm::Sp)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// How the greedy B-MAP solver updates its residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResidualMode {
    /// `r ← r - β·a_î` (constant-amplitude signals).
    FixedBeta,
    /// `r ← y - A_Î x_Î` with `x_Î` the least-squares fit.
    LeastSquares,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub residual_mode: ResidualMode,
    pub two_sided: bool,
    /// Iteration cap for the iterative solvers. Greedy solvers always run
    /// exactly `K` iterations.
    pub max_iters: usize,
    /// Candidates identified per iteration (`L`).
    pub selection_size: usize,
    #[serde(default)]
    pub record_trace: bool,
}

impl SolverConfig {
    /// Defaults for sparsity `k` and the given signal model.
    pub fn new(algorithm: Algorithm, k: usize, model: &SignalModel) -> Self {
        let residual_mode = if model.is_constant() {
            ResidualMode::FixedBeta
        } else {
            ResidualMode::LeastSquares
        };
        let selection_size = match algorithm {
            Algorithm::Bmap | Algorithm::Omp => 1,
            Algorithm::CoSaMP => 2 * k,
            Algorithm::BCoSaMP | Algorithm::Bsp | Algorithm::Sp => k,
        };
        let max_iters = if algorithm.is_greedy() { k } else { 2 * k };
        Self {
            algorithm,
            residual_mode,
            two_sided: model.is_two_sided(),
            max_iters,
            selection_size,
            record_trace: false,
        }
    }

    pub fn with_trace(mut self) -> Self {
        self.record_trace = true;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.selection_size == 0 || self.max_iters == 0 {
            return Err(Error::InvalidParameter(format!(
                "{}: selection_size and max_iters must be positive",
                self.algorithm
            )));
        }
        Ok(())
    }
}

/// Running state of a solver.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub selected: SupportEstimate,
    pub residual: DVector<f64>,
    /// `A·1 - Σ_{j ∈ selected} a_j`.
    pub unselected_colsum: DVector<f64>,
    pub iter: usize,
    pub best_residual_norm: f64,
}

impl SolverState {
    fn new(problem: &RecoveryProblem) -> Self {
        let r = problem.y().clone();
        let norm = r.norm();
        Self {
            selected: SupportEstimate::empty(),
            residual: r,
            unselected_colsum: column_sum(problem.a()),
            iter: 0,
            best_residual_norm: norm,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iter: usize,
    /// Index added this iteration (greedy solvers only).
    pub chosen: Option<usize>,
    /// Support after the iteration, in solver order.
    pub support: Vec<usize>,
    /// Coefficients used for the reconstruction `A_S x_S`.
    pub coefficients: Vec<f64>,
    pub residual: DVector<f64>,
}

impl IterationRecord {
    pub fn residual_norm(&self) -> f64 {
        self.residual.norm()
    }
}

#[derive(Debug, Clone)]
pub struct SolverOutput {
    pub estimate: SupportEstimate,
    pub iterations: usize,
    pub residual_norm: f64,
    pub trace: Vec<IterationRecord>,
}

/// Run the algorithm named in `cfg`.
pub fn solve(problem: &RecoveryProblem, model: &SignalModel, cfg: &SolverConfig) -> Result<SolverOutput> {
    cfg.validate()?;
    match cfg.algorithm {
        Algorithm::Bmap => {
            let mut run = GreedyRun::bmap(problem, model, cfg)?;
            run.run_to_end()?;
            Ok(run.finish())
        }
        Algorithm::Omp => {
            let mut run = GreedyRun::omp(problem, cfg);
            run.run_to_end()?;
            Ok(run.finish())
        }
        Algorithm::BCoSaMP | Algorithm::Bsp => {
            let beta = model.beta_star()?;
            let proxy = BmapProxy::new(problem.a(), ProxyParams::from_problem(problem, beta)?)?;
            let two_sided = cfg.two_sided;
            let k_max = problem.k();
            iterative_pursuit(problem, cfg, |state| {
                let k = (state.selected.len() + 1).min(k_max);
                if two_sided {
                    proxy.scores_two_sided(&state.residual, &state.unselected_colsum, k).0
                } else {
                    proxy.scores(&state.residual, &state.unselected_colsum, k, beta)
                }
            })
        }
        Algorithm::CoSaMP | Algorithm::Sp => iterative_pursuit(problem, cfg, |state| {
            problem.a().tr_mul(&state.residual).iter().map(|v| v.abs()).collect()
        }),
    }
}

fn expect_algorithm(cfg: &SolverConfig, allowed: &[Algorithm]) -> Result<()> {
    if allowed.contains(&cfg.algorithm) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "config names {}, expected one of {:?}",
            cfg.algorithm, allowed
        )))
    }
}

/// Greedy B-MAP detection (fixed-amplitude or least-squares residual).
pub fn bmap_greedy(problem: &RecoveryProblem, model: &SignalModel, cfg: &SolverConfig) -> Result<SupportEstimate> {
    expect_algorithm(cfg, &[Algorithm::Bmap])?;
    solve(problem, model, cfg).map(|o| o.estimate)
}

pub fn b_cosamp(problem: &RecoveryProblem, model: &SignalModel, cfg: &SolverConfig) -> Result<SupportEstimate> {
    expect_algorithm(cfg, &[Algorithm::BCoSaMP])?;
    solve(problem, model, cfg).map(|o| o.estimate)
}

pub fn b_sp(problem: &RecoveryProblem, model: &SignalModel, cfg: &SolverConfig) -> Result<SupportEstimate> {
    expect_algorithm(cfg, &[Algorithm::Bsp])?;
    solve(problem, model, cfg).map(|o| o.estimate)
}

/// The baselines never look at the signal model.
fn baseline(problem: &RecoveryProblem, cfg: &SolverConfig, alg: Algorithm) -> Result<SupportEstimate> {
    expect_algorithm(cfg, &[alg])?;
    solve(problem, &SignalModel::binary(), cfg).map(|o| o.estimate)
}

pub fn omp(problem: &RecoveryProblem, cfg: &SolverConfig) -> Result<SupportEstimate> {
    baseline(problem, cfg, Algorithm::Omp)
}

pub fn cosamp(problem: &RecoveryProblem, cfg: &SolverConfig) -> Result<SupportEstimate> {
    baseline(problem, cfg, Algorithm::CoSaMP)
}

pub fn sp(problem: &RecoveryProblem, cfg: &SolverConfig) -> Result<SupportEstimate> {
    baseline(problem, cfg, Algorithm::Sp)
}

enum Selector<'a> {
    Bmap {
        proxy: BmapProxy<'a>,
        beta: f64,
        two_sided: bool,
    },
    Omp,
}

/// Step-wise greedy solver; one [`GreedyRun::step`] selects one index.
pub struct GreedyRun<'a> {
    problem: &'a RecoveryProblem,
    selector: Selector<'a>,
    mode: ResidualMode,
    state: SolverState,
    coefficients: Vec<f64>,
    record_trace: bool,
    trace: Vec<IterationRecord>,
}

impl<'a> GreedyRun<'a> {
    pub fn bmap(problem: &'a RecoveryProblem, model: &SignalModel, cfg: &SolverConfig) -> Result<Self> {
        let beta = model.beta_star()?;
        let proxy = BmapProxy::new(problem.a(), ProxyParams::from_problem(problem, beta)?)?;
        Ok(Self {
            problem,
            selector: Selector::Bmap {
                proxy,
                beta,
                two_sided: cfg.two_sided,
            },
            mode: cfg.residual_mode,
            state: SolverState::new(problem),
            coefficients: Vec::new(),
            record_trace: cfg.record_trace,
            trace: Vec::new(),
        })
    }

    pub fn omp(problem: &'a RecoveryProblem, cfg: &SolverConfig) -> Self {
        Self {
            problem,
            selector: Selector::Omp,
            mode: ResidualMode::LeastSquares,
            state: SolverState::new(problem),
            coefficients: Vec::new(),
            record_trace: cfg.record_trace,
            trace: Vec::new(),
        }
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn is_done(&self) -> bool {
        self.state.selected.len() >= self.problem.k()
    }

    /// Scores the current iteration would use (selected indices at `-∞`).
    pub fn current_scores(&self) -> Result<Vec<f64>> {
        let k = self.state.selected.len() + 1;
        let mut scores = match &self.selector {
            Selector::Bmap {
                proxy,
                beta,
                two_sided,
            } => {
                if *two_sided {
                    proxy.scores_two_sided(&self.state.residual, &self.state.unselected_colsum, k).0
                } else {
                    proxy.scores(&self.state.residual, &self.state.unselected_colsum, k, *beta)
                }
            }
            Selector::Omp => omp_scores(self.problem.a(), &self.state.residual)?,
        };
        for &j in self.state.selected.indices() {
            scores[j] = f64::NEG_INFINITY;
        }
        Ok(scores)
    }

    /// Select one index. Returns `None` once `K` indices are chosen.
    pub fn step(&mut self) -> Result<Option<usize>> {
        if self.is_done() {
            return Ok(None);
        }
        let k = self.state.selected.len() + 1;
        let a = self.problem.a();
        let (chosen, sign) = match &self.selector {
            Selector::Bmap {
                proxy,
                beta,
                two_sided,
            } => {
                let (mut scores, signs) = if *two_sided {
                    proxy.scores_two_sided(&self.state.residual, &self.state.unselected_colsum, k)
                } else {
                    let s = proxy.scores(&self.state.residual, &self.state.unselected_colsum, k, *beta);
                    let n = s.len();
                    (s, vec![1.0; n])
                };
                for &j in self.state.selected.indices() {
                    scores[j] = f64::NEG_INFINITY;
                }
                let j = argmax(&scores).ok_or_else(|| Error::Domain(format!("no finite proxy score at k = {k}")))?;
                (j, signs[j])
            }
            Selector::Omp => {
                let mut scores = omp_scores(a, &self.state.residual)?;
                for &j in self.state.selected.indices() {
                    scores[j] = f64::NEG_INFINITY;
                }
                let j = argmax(&scores).ok_or_else(|| Error::Domain("no finite OMP score".into()))?;
                (j, 1.0)
            }
        };

        self.state.selected.push(chosen);
        self.state.unselected_colsum -= a.column(chosen);
        match self.mode {
            ResidualMode::FixedBeta => {
                let amp = match &self.selector {
                    Selector::Bmap { beta, two_sided, .. } => {
                        if *two_sided {
                            sign * beta.abs()
                        } else {
                            *beta
                        }
                    }
                    Selector::Omp => unreachable!("OMP always refits"),
                };
                self.state.residual.axpy(-amp, &a.column(chosen), 1.0);
                self.coefficients.push(amp);
            }
            ResidualMode::LeastSquares => {
                let idx = self.state.selected.indices();
                let sub = a.select_columns(idx);
                let x = least_squares(&sub, self.problem.y())?;
                self.state.residual = residual(a, self.problem.y(), idx, &x);
                self.coefficients = x.iter().copied().collect();
            }
        }
        self.state.iter += 1;
        self.state.best_residual_norm = self.state.best_residual_norm.min(self.state.residual.norm());
        if self.record_trace {
            self.trace.push(IterationRecord {
                iter: self.state.iter,
                chosen: Some(chosen),
                support: self.state.selected.indices().to_vec(),
                coefficients: self.coefficients.clone(),
                residual: self.state.residual.clone(),
            });
        }
        Ok(Some(chosen))
    }

    pub fn run_to_end(&mut self) -> Result<()> {
        while self.step()?.is_some() {}
        Ok(())
    }

    /// `A_Î x_Î` from the coefficients the solver currently holds.
    pub fn reconstruction(&self) -> DVector<f64> {
        let a = self.problem.a();
        let mut v = DVector::zeros(a.nrows());
        for (&j, &c) in self.state.selected.indices().iter().zip(&self.coefficients) {
            v.axpy(c, &a.column(j), 1.0);
        }
        v
    }

    pub fn finish(self) -> SolverOutput {
        SolverOutput {
            residual_norm: self.state.residual.norm(),
            iterations: self.state.iter,
            estimate: self.state.selected,
            trace: self.trace,
        }
    }
}

/// Identify → merge → least squares → prune (→ refit) → residual, repeated.
fn iterative_pursuit<F>(problem: &RecoveryProblem, cfg: &SolverConfig, mut select: F) -> Result<SolverOutput>
where
    F: FnMut(&SolverState) -> Vec<f64>,
{
    let a = problem.a();
    let y = problem.y();
    let k = problem.k();
    let mut state = SolverState::new(problem);
    let mut best: Option<(f64, Vec<usize>)> = None;
    let mut prev_norm = y.norm();
    let mut trace = Vec::new();

    for it in 1..=cfg.max_iters {
        let scores = select(&state);
        let mut merged = top_indices(&scores, cfg.selection_size);
        merged.extend_from_slice(state.selected.indices());
        merged.sort_unstable();
        merged.dedup();

        let x = least_squares(&a.select_columns(&merged), y)?;
        let magnitudes: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let mut pruned: Vec<usize> = top_indices(&magnitudes, k).into_iter().map(|p| merged[p]).collect();
        pruned.sort_unstable();

        let coeffs = if cfg.algorithm.refits_after_prune() {
            least_squares(&a.select_columns(&pruned), y)?
        } else {
            DVector::from_iterator(
                pruned.len(),
                pruned.iter().map(|j| x[merged.binary_search(j).expect("pruned ⊂ merged")]),
            )
        };
        let r = residual(a, y, &pruned, &coeffs);
        let norm = r.norm();

        let repeated = state.selected.sorted() == pruned;
        let stalled = norm > prev_norm * (1.0 - STALL_TOL);
        if best.as_ref().is_none_or(|(b, _)| norm < *b) {
            best = Some((norm, pruned.clone()));
        }

        state.unselected_colsum = column_sum(a);
        for &j in &pruned {
            state.unselected_colsum -= a.column(j);
        }
        state.selected = SupportEstimate::new(pruned)?;
        state.residual = r;
        state.iter = it;
        state.best_residual_norm = state.best_residual_norm.min(norm);
        if cfg.record_trace {
            trace.push(IterationRecord {
                iter: it,
                chosen: None,
                support: state.selected.indices().to_vec(),
                coefficients: coeffs.iter().copied().collect(),
                residual: state.residual.clone(),
            });
        }
        prev_norm = norm;
        if repeated || stalled {
            break;
        }
    }

    let (norm, support) = best.expect("max_iters >= 1");
    Ok(SolverOutput {
        estimate: SupportEstimate::new(support)?,
        iterations: state.iter,
        residual_norm: norm,
        trace,
    })
}

/// Reconstruction `A_S x_S` for a trace record.
pub fn record_reconstruction(a: &DMatrix<f64>, rec: &IterationRecord) -> DVector<f64> {
    let mut v = DVector::zeros(a.nrows());
    for (&j, &c) in rec.support.iter().zip(&rec.coefficients) {
        v.axpy(c, &a.column(j), 1.0);
    }
    v
}
