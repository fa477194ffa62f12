use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::spec::{AlgorithmSpec, PriorMode, SweepSpec};
use crate::ensembles::{generate_matrix, measure, sample_signal, sample_support, sigma2_from_snr, snr_db_to_linear};
use crate::error::{Error, Result};
use crate::model::{exact_recovery, GroundTruth, RecoveryProblem};
use crate::rng::{stream_id, Rng};
use crate::solvers::{solve, SolverOutput};

const TAG_MATRIX: u64 = 1;
const TAG_SUPPORT: u64 = 2;
const TAG_SIGNAL: u64 = 3;
const TAG_NOISE: u64 = 4;

/// Everything random about one trial. Every algorithm in a sweep sees the
/// same instance for a given `(K, trial)` pair.
#[derive(Debug, Clone)]
pub struct TrialInstance {
    pub a: DMatrix<f64>,
    pub y: DVector<f64>,
    pub truth: GroundTruth,
    pub sigma2: f64,
    /// Priors handed to prior-aware solvers.
    pub priors: Vec<f64>,
    pub k: usize,
}

impl TrialInstance {
    /// Problem as seen by `alg`: priors only reach prior-aware B-MAP solvers.
    pub fn problem_for(&self, alg: &AlgorithmSpec) -> Result<RecoveryProblem> {
        let priors = alg.uses_priors().then(|| self.priors.clone());
        RecoveryProblem::new(self.a.clone(), self.y.clone(), self.k, self.sigma2, priors)
    }
}

fn trial_rng(spec: &SweepSpec, k: usize, trial_idx: u64) -> Rng {
    Rng::new(spec.base_seed, stream_id(&[k as u64, spec.m as u64, spec.n as u64, trial_idx]))
}

/// Draw the matrix, support, signal and noise for `(K, trial_idx)`.
///
/// Each draw has its own sub-stream, so changing one law never shifts the
/// others.
pub fn build_trial(spec: &SweepSpec, k: usize, trial_idx: u64) -> Result<TrialInstance> {
    let root = trial_rng(spec, k, trial_idx);
    let (m, n) = (spec.m, spec.n);
    let a = generate_matrix(spec.ensemble, m, n, &mut root.substream(TAG_MATRIX));
    let support = sample_support(n, k, &vec![0.5; n], &mut root.substream(TAG_SUPPORT))?;
    let truth = sample_signal(&spec.signal, &support, n, &mut root.substream(TAG_SIGNAL))?;
    let sigma2 = match spec.snr_db {
        Some(db) => sigma2_from_snr(&spec.signal, k, m, snr_db_to_linear(db))?,
        None => 0.0,
    };
    let y = measure(&a, &truth, sigma2, &mut root.substream(TAG_NOISE))?;
    let mut priors = vec![0.5; n];
    if let PriorMode::SupportBoost(p_hi) = spec.prior_mode {
        for &j in truth.support() {
            priors[j] = p_hi;
        }
    }
    Ok(TrialInstance {
        a,
        y,
        truth,
        sigma2,
        priors,
        k,
    })
}

#[derive(Debug, Clone)]
pub struct TrialOutcome {
    pub success: bool,
    pub runtime: Duration,
    pub output: SolverOutput,
}

fn wrap(alg: &AlgorithmSpec, k: usize, trial_idx: u64) -> impl FnOnce(Error) -> Error + '_ {
    move |e| Error::Trial {
        algorithm: alg.label().to_owned(),
        k,
        trial: trial_idx,
        source: Box::new(e),
    }
}

/// Run one solver on a prepared instance.
pub fn run_on_instance(spec: &SweepSpec, inst: &TrialInstance, alg: &AlgorithmSpec, trial_idx: u64) -> Result<TrialOutcome> {
    let k = inst.k;
    let problem = inst.problem_for(alg).map_err(wrap(alg, k, trial_idx))?;
    let cfg = alg.resolve(k, &spec.signal);
    let clock = Clock::start();
    let output = solve(&problem, &spec.signal, &cfg).map_err(wrap(alg, k, trial_idx))?;
    let runtime = clock.elapsed();
    Ok(TrialOutcome {
        success: exact_recovery(&output.estimate, &inst.truth),
        runtime,
        output,
    })
}

/// One Monte Carlo draw: exact support recovery by `alg` on trial
/// `trial_idx` at sparsity `k`.
pub fn run_trial(spec: &SweepSpec, k: usize, alg: &AlgorithmSpec, trial_idx: u64) -> Result<bool> {
    let inst = build_trial(spec, k, trial_idx)?;
    run_on_instance(spec, &inst, alg, trial_idx).map(|o| o.success)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub algorithm: String,
    #[serde(rename = "K")]
    pub k: usize,
    pub successes: u64,
    pub trials: u64,
    pub recon_prob: f64,
    /// Mean solver wall-clock per trial, seconds.
    pub mean_runtime: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepResult {
    pub spec: SweepSpec,
    /// Rows ordered by algorithm (config order), then by `K`.
    pub rows: Vec<SweepRow>,
    pub wall_clock: f64,
    pub version: String,
}

impl SweepResult {
    pub fn row(&self, label: &str, k: usize) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.algorithm == label && r.k == k)
    }

    pub fn recon_prob(&self, label: &str, k: usize) -> Option<f64> {
        self.row(label, k).map(|r| r.recon_prob)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.spec.algorithms.iter().map(|a| a.label()).collect()
    }
}

/// Per-cell result: one `(success, seconds)` pair per algorithm.
type Cell = Vec<(bool, f64)>;

fn run_cell(spec: &SweepSpec, k: usize, trial_idx: u64) -> Result<Cell> {
    let inst = build_trial(spec, k, trial_idx).map_err(|e| Error::Trial {
        algorithm: "<instance>".into(),
        k,
        trial: trial_idx,
        source: Box::new(e),
    })?;
    spec.algorithms
        .iter()
        .map(|alg| run_on_instance(spec, &inst, alg, trial_idx).map(|o| (o.success, o.runtime.as_secs_f64())))
        .collect()
}

/// Run every `(K, trial)` cell and aggregate per `(algorithm, K)`.
///
/// `threads = None` uses the global pool. Results do not depend on the
/// thread count: cells are seeded by position and merged in order.
pub fn run_sweep(spec: &SweepSpec, threads: Option<usize>) -> Result<SweepResult> {
    spec.validate()?;
    let clock = Clock::start();
    let cells: Vec<(usize, u64)> = spec
        .k_values
        .iter()
        .flat_map(|&k| (0..spec.trials).map(move |t| (k, t)))
        .collect();
    let outcomes = map_cells(&cells, threads, |&(k, t)| run_cell(spec, k, t))?;

    let mut rows = Vec::with_capacity(spec.algorithms.len() * spec.k_values.len());
    for (ai, alg) in spec.algorithms.iter().enumerate() {
        for (ki, &k) in spec.k_values.iter().enumerate() {
            let block = &outcomes[ki * spec.trials as usize..(ki + 1) * spec.trials as usize];
            let successes = block.iter().filter(|c| c[ai].0).count() as u64;
            let seconds: f64 = block.iter().map(|c| c[ai].1).sum();
            rows.push(SweepRow {
                algorithm: alg.label().to_owned(),
                k,
                successes,
                trials: spec.trials,
                recon_prob: successes as f64 / spec.trials as f64,
                mean_runtime: seconds / spec.trials as f64,
            });
        }
    }
    Ok(SweepResult {
        spec: spec.clone(),
        rows,
        wall_clock: clock.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION").to_owned(),
    })
}

#[cfg(feature = "parallel")]
fn map_cells<T, R, F>(items: &[T], threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> Result<R> + Sync + Send,
{
    use rayon::prelude::*;
    let work = || items.par_iter().map(&f).collect::<Result<Vec<R>>>();
    match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(work),
        None => work(),
    }
}

#[cfg(not(feature = "parallel"))]
fn map_cells<T, R, F>(items: &[T], _threads: Option<usize>, f: F) -> Result<Vec<R>>
where
    F: Fn(&T) -> Result<R>,
{
    items.iter().map(f).collect()
}

/// Wall-clock timer that degrades to zero where `Instant` is unavailable.
struct Clock {
    #[cfg(not(target_arch = "wasm32"))]
    start: std::time::Instant,
}

impl Clock {
    fn start() -> Self {
        Self {
            #[cfg(not(target_arch = "wasm32"))]
            start: std::time::Instant::now(),
        }
    }

    fn elapsed(&self) -> Duration {
        #[cfg(not(target_arch = "wasm32"))]
        {
            self.start.elapsed()
        }
        #[cfg(target_arch = "wasm32")]
        {
            Duration::ZERO
        }
    }
}
