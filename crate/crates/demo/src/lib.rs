//! Browser bindings for the interactive demo page in `www/`.
//!
//! Each exported function returns a JSON string; the page parses it and
//! draws on a canvas. The `*_json` functions hold the logic so they can be
//! tested natively.

use bmap_core::ensembles::{MatrixEnsemble, SignalModel};
use bmap_core::harness::{build_trial, run_sweep, AlgorithmSpec, PriorMode, SweepSpec};
use bmap_core::oracle::success_prob_lower_bound_ln;
use bmap_core::proxy::{bmap_scores, omp_scores, ProxyParams};
use bmap_core::solvers::Algorithm;
use bmap_core::SupportEstimate;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn ensemble(name: &str) -> Result<MatrixEnsemble, String> {
    MatrixEnsemble::from_name(name).ok_or_else(|| format!("unknown ensemble {name:?}"))
}

fn noise_free_spec(ens: MatrixEnsemble, n: usize, m: usize, k_values: Vec<usize>, trials: u64, seed: u64) -> SweepSpec {
    SweepSpec {
        n,
        m,
        k_values,
        ensemble: ens,
        signal: SignalModel::binary(),
        snr_db: None,
        algorithms: vec![AlgorithmSpec::new(Algorithm::Bmap), AlgorithmSpec::new(Algorithm::Omp)],
        trials,
        base_seed: seed,
        prior_mode: PriorMode::Uniform,
    }
}

/// Exact-recovery rate of B-MAP and OMP for `K = 1..=M/2`, binary signals,
/// no noise.
pub fn reconstruction_curve_json(ens: &str, n: usize, m: usize, trials: u32, seed: u64) -> Result<String, String> {
    let ens = ensemble(ens)?;
    let k_values: Vec<usize> = (1..=m / 2).filter(|&k| n > k + 1).collect();
    let spec = noise_free_spec(ens, n, m, k_values, trials.into(), seed);
    let result = run_sweep(&spec, None).map_err(|e| e.to_string())?;
    let series: Vec<_> = result
        .labels()
        .into_iter()
        .map(|label| {
            let points: Vec<_> = spec
                .k_values
                .iter()
                .map(|&k| json!([k, result.recon_prob(label, k).unwrap_or(f64::NAN)]))
                .collect();
            json!({ "label": label, "points": points })
        })
        .collect();
    Ok(json!({ "n": n, "m": m, "ensemble": ens.name(), "trials": trials, "series": series }).to_string())
}

/// First-iteration scores of both selection rules on one random instance,
/// with the true support marked.
pub fn proxy_landscape_json(ens: &str, n: usize, m: usize, k: usize, seed: u64) -> Result<String, String> {
    let ens = ensemble(ens)?;
    let spec = noise_free_spec(ens, n, m, vec![k], 1, seed);
    spec.validate().map_err(|e| e.to_string())?;
    let inst = build_trial(&spec, k, 0).map_err(|e| e.to_string())?;
    let problem = inst.problem_for(&spec.algorithms[0]).map_err(|e| e.to_string())?;
    let params = ProxyParams::from_problem(&problem, 1.0).map_err(|e| e.to_string())?;
    let bmap = bmap_scores(&inst.a, &inst.y, &SupportEstimate::empty(), 1, &params).map_err(|e| e.to_string())?;
    let omp = omp_scores(&inst.a, &inst.y).map_err(|e| e.to_string())?;
    Ok(json!({ "bmap": bmap, "omp": omp, "support": inst.truth.support() }).to_string())
}

/// Natural log of the success-probability lower bound for `M = 1..=m_max`.
pub fn success_bound_json(n: usize, k: usize, sigma2: f64, m_max: usize) -> Result<String, String> {
    let points = (1..=m_max)
        .map(|m| success_prob_lower_bound_ln(m, n, k, sigma2).map(|ln| json!([m, ln])))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    Ok(json!({ "n": n, "k": k, "sigma2": sigma2, "points": points }).to_string())
}

#[wasm_bindgen]
pub fn reconstruction_curve(ensemble: &str, n: usize, m: usize, trials: u32, seed: u64) -> Result<String, JsError> {
    reconstruction_curve_json(ensemble, n, m, trials, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn proxy_landscape(ensemble: &str, n: usize, m: usize, k: usize, seed: u64) -> Result<String, JsError> {
    proxy_landscape_json(ensemble, n, m, k, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn success_bound(n: usize, k: usize, sigma2: f64, m_max: usize) -> Result<String, JsError> {
    success_bound_json(n, k, sigma2, m_max).map_err(|e| JsError::new(&e))
}
