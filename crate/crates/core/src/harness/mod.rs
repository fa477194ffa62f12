//! Config-driven Monte Carlo sweeps.
//!
//! A [`SweepSpec`] names the problem size, ensemble, signal law, noise level
//! and the solvers to compare. [`run_sweep`] draws one instance per
//! `(K, trial)` cell, hands the same instance to every solver and counts exact
//! support recoveries. Results are written as CSV, JSON or an SVG chart.

pub mod emit;
pub mod run;
pub mod spec;
pub mod verify;

pub use emit::{emit_results, parse_csv, to_csv, to_json, to_svg, CsvRow, Format};
pub use run::{build_trial, run_on_instance, run_sweep, run_trial, SweepResult, SweepRow, TrialInstance, TrialOutcome};
pub use spec::{AlgorithmSpec, PriorMode, SweepSpec};
