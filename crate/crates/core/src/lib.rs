//! Greedy support recovery driven by a bit-wise MAP proxy.
//!
//! The crate is organised bottom-up:
//!
//! * [`model`] and [`numeric`]: problem instances, the exact-recovery criterion,
//!   KL divergence, binary entropy and normal-law helpers.
//! * [`ensembles`]: measurement matrices, sparse signals, supports and noise.
//! * [`proxy`]: the `λ_k` schedule, `β*` selection, the B-MAP proxy and the
//!   OMP correlation proxy.
//! * [`solvers`]: B-MAP greedy, B-CoSaMP, B-SP and the OMP / CoSaMP / SP
//!   baselines on top of [`lsq::least_squares`].
//! * [`oracle`]: brute-force posteriors, the full lower bound with its
//!   constants, and the success-probability analysis formulas.
//! * [`harness`]: config-driven Monte Carlo sweeps and result emitters.

pub mod ensembles;
pub mod error;
pub mod harness;
pub mod lsq;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod proxy;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{exact_recovery, GroundTruth, RecoveryProblem, SupportEstimate};
pub use rng::Rng;
