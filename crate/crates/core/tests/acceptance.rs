//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails.

use std::process::ExitCode;
use std::time::Instant;

use bmap_core::ensembles::{MatrixEnsemble, NonzeroDistribution, SignalModel};
use bmap_core::harness::verify::{
    bound_shape, proxy_bound_identity, jensen_bound, oracle_agreement, projection_law, ORACLE_AGREEMENT_THRESHOLD,
};
use bmap_core::harness::{run_sweep, to_csv, AlgorithmSpec, PriorMode, SweepResult, SweepSpec};
use bmap_core::solvers::Algorithm;

const SEED: u64 = 20240601;
const TRIALS: u64 = 500;

struct Report {
    failures: Vec<u32>,
}

impl Report {
    fn record(&mut self, id: u32, passed: bool, detail: &str, secs: f64) {
        let tag = if passed { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {id}: {detail} ({secs:.1}s)");
        if !passed {
            self.failures.push(id);
        }
    }
}

fn algs(list: &[Algorithm]) -> Vec<AlgorithmSpec> {
    list.iter().map(|&a| AlgorithmSpec::new(a)).collect()
}

fn noise_free_specs() -> Vec<SweepSpec> {
    MatrixEnsemble::ALL
        .into_iter()
        .map(|ensemble| SweepSpec {
            n: 128,
            m: 32,
            k_values: vec![4, 8, 12, 16],
            ensemble,
            signal: SignalModel::binary(),
            snr_db: None,
            algorithms: algs(&[Algorithm::Bmap, Algorithm::Omp]),
            trials: TRIALS,
            base_seed: SEED,
            prior_mode: PriorMode::Uniform,
        })
        .collect()
}

fn prior_spec() -> SweepSpec {
    SweepSpec {
        n: 128,
        m: 64,
        k_values: vec![8, 16, 20, 24, 28],
        ensemble: MatrixEnsemble::GaussianInvM,
        signal: SignalModel::binary(),
        snr_db: Some(30.0),
        algorithms: vec![
            AlgorithmSpec::new(Algorithm::Bmap).labelled("BMAP-prior"),
            AlgorithmSpec::new(Algorithm::Bmap).labelled("BMAP-uniform").without_priors(),
        ],
        trials: TRIALS,
        base_seed: SEED,
        prior_mode: PriorMode::SupportBoost(0.55),
    }
}

fn uniform_signal_specs() -> Vec<SweepSpec> {
    let signal = SignalModel::one_sided(NonzeroDistribution::Uniform { lo: 0.5, hi: 1.5 }, 1e-3).expect("valid law");
    [MatrixEnsemble::GaussianInvM, MatrixEnsemble::UniformSym]
        .into_iter()
        .map(|ensemble| SweepSpec {
            n: 128,
            m: 64,
            k_values: vec![4, 8, 12, 16, 20, 24, 28],
            ensemble,
            signal: signal.clone(),
            snr_db: Some(30.0),
            algorithms: algs(&Algorithm::ALL),
            trials: TRIALS,
            base_seed: SEED,
            prior_mode: PriorMode::Uniform,
        })
        .collect()
}

fn sweep(spec: &SweepSpec, threads: usize) -> SweepResult {
    run_sweep(spec, Some(threads)).unwrap_or_else(|e| panic!("sweep failed: {e}"))
}

/// `(ok, first violation)` for `better >= worse - slack` at every K.
fn dominates(r: &SweepResult, better: &str, worse: &str, slack: f64) -> (bool, Option<String>) {
    for &k in &r.spec.k_values {
        let (b, w) = (r.recon_prob(better, k).unwrap(), r.recon_prob(worse, k).unwrap());
        if b < w - slack {
            return (false, Some(format!("{} K={k}: {better} {b:.3} < {worse} {w:.3}", r.spec.ensemble)));
        }
    }
    (true, None)
}

fn max_gap(r: &SweepResult, better: &str, worse: &str) -> f64 {
    r.spec
        .k_values
        .iter()
        .map(|&k| r.recon_prob(better, k).unwrap() - r.recon_prob(worse, k).unwrap())
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest `M` in `[lo, hi]` with success rate >= `target`, by bisection.
fn min_measurements(n: usize, k: usize, target: f64, trials: u64) -> Option<usize> {
    let rate = |m: usize| {
        let spec = SweepSpec {
            n,
            m,
            k_values: vec![k],
            ensemble: MatrixEnsemble::GaussianInvM,
            signal: SignalModel::binary(),
            snr_db: None,
            algorithms: algs(&[Algorithm::Bmap]),
            trials,
            base_seed: SEED,
            prior_mode: PriorMode::Uniform,
        };
        sweep(&spec, 1).rows[0].recon_prob
    };
    let (mut lo, mut hi) = (2 * k, n - 1);
    if rate(hi) < target {
        return None;
    }
    if rate(lo) >= target {
        return Some(lo);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if rate(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(hi)
}

fn main() -> ExitCode {
    let mut report = Report { failures: Vec::new() };

    let t = Instant::now();
    let c1 = proxy_bound_identity(100, SEED).expect("identity suite");
    let secs = t.elapsed().as_secs_f64();
    report.record(1, c1.passed && secs < 30.0, &c1.detail, secs);

    let t = Instant::now();
    let c2 = jensen_bound(50, SEED).expect("bound suite");
    let secs = t.elapsed().as_secs_f64();
    report.record(2, c2.passed && secs < 60.0, &c2.detail, secs);

    let t = Instant::now();
    let c3 = oracle_agreement(200, SEED, ORACLE_AGREEMENT_THRESHOLD).expect("oracle suite");
    report.record(3, c3.passed, &c3.detail, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let noise_free: Vec<SweepResult> = noise_free_specs().iter().map(|s| sweep(s, 1)).collect();
    let mut ok = true;
    let mut notes = Vec::new();
    for r in &noise_free {
        let (dom, why) = dominates(r, "BMAP", "OMP", 0.0);
        ok &= dom;
        notes.extend(why);
        let gap = max_gap(r, "BMAP", "OMP");
        if matches!(r.spec.ensemble, MatrixEnsemble::Bernoulli01 | MatrixEnsemble::Uniform01) && gap < 0.05 {
            ok = false;
            notes.push(format!("{}: largest gain {gap:.3} < 0.05", r.spec.ensemble));
        }
        let row: Vec<String> = r
            .spec
            .k_values
            .iter()
            .map(|&k| format!("{:.2}/{:.2}", r.recon_prob("BMAP", k).unwrap(), r.recon_prob("OMP", k).unwrap()))
            .collect();
        notes.push(format!("{} BMAP/OMP {}", r.spec.ensemble, row.join(" ")));
    }
    let secs = t.elapsed().as_secs_f64();
    report.record(4, ok && secs < 300.0, &notes.join("; "), secs);

    let t = Instant::now();
    let priors = sweep(&prior_spec(), 1);
    let (ok, why) = dominates(&priors, "BMAP-prior", "BMAP-uniform", 0.02);
    let row: Vec<String> = priors
        .spec
        .k_values
        .iter()
        .map(|&k| {
            format!(
                "K={k} {:.3}/{:.3}",
                priors.recon_prob("BMAP-prior", k).unwrap(),
                priors.recon_prob("BMAP-uniform", k).unwrap()
            )
        })
        .collect();
    let detail = match why {
        Some(w) => w,
        None => format!("prior/uniform {}", row.join(" ")),
    };
    report.record(5, ok, &detail, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let uniform_signal: Vec<SweepResult> = uniform_signal_specs().iter().map(|s| sweep(s, 1)).collect();
    let mut ok = true;
    let mut notes = Vec::new();
    for r in &uniform_signal {
        for (b, w) in [("BMAP", "OMP"), ("BCoSaMP", "CoSaMP"), ("BSP", "SP")] {
            let (dom, why) = dominates(r, b, w, 0.02);
            ok &= dom;
            notes.extend(why);
        }
        notes.push(format!(
            "{} K=16: BMAP {:.2} OMP {:.2} BCoSaMP {:.2} CoSaMP {:.2} BSP {:.2} SP {:.2}",
            r.spec.ensemble,
            r.recon_prob("BMAP", 16).unwrap(),
            r.recon_prob("OMP", 16).unwrap(),
            r.recon_prob("BCoSaMP", 16).unwrap(),
            r.recon_prob("CoSaMP", 16).unwrap(),
            r.recon_prob("BSP", 16).unwrap(),
            r.recon_prob("SP", 16).unwrap()
        ));
    }
    report.record(6, ok, &notes.join("; "), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let c7 = projection_law(16, 10_000, SEED).expect("projection suite");
    report.record(7, c7.passed, &c7.detail, t.elapsed().as_secs_f64());

    let t = Instant::now();
    let k = 4;
    let mut fitted: f64 = 0.0;
    let mut ok = true;
    let mut notes = Vec::new();
    for n in [64usize, 128, 256] {
        match min_measurements(n, k, 0.95, 200) {
            Some(m) => {
                let c = m as f64 / (k as f64 * (n as f64).ln());
                fitted = fitted.max(c);
                notes.push(format!("N={n}: M_min={m} (M/(K ln N) = {c:.2})"));
            }
            None => {
                ok = false;
                notes.push(format!("N={n}: 95% not reached below M=N"));
            }
        }
    }
    ok &= fitted <= 4.0;
    let shape = bound_shape().expect("bound grid");
    ok &= shape.passed;
    notes.push(format!("fitted c = {fitted:.2} (limit 4)"));
    notes.push(shape.detail);
    report.record(8, ok, &notes.join("; "), t.elapsed().as_secs_f64());

    let t = Instant::now();
    let first: Vec<String> = noise_free
        .iter()
        .chain(std::iter::once(&priors))
        .chain(&uniform_signal)
        .map(|r| to_csv(r).expect("csv"))
        .collect();
    let specs: Vec<SweepSpec> = noise_free_specs().into_iter().chain([prior_spec()]).chain(uniform_signal_specs()).collect();
    let second: Vec<String> = specs.iter().map(|s| to_csv(&sweep(s, 4)).expect("csv")).collect();
    let same = first == second;
    let bytes: usize = first.iter().map(String::len).sum();
    report.record(
        9,
        same,
        &format!("{} sweeps, {bytes} CSV bytes, 1 thread vs 4 threads identical: {same}", specs.len()),
        t.elapsed().as_secs_f64(),
    );

    if report.failures.is_empty() {
        println!("all acceptance criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {:?}", report.failures);
        ExitCode::FAILURE
    }
}
