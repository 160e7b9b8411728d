//! Numerical engine for passive decoy-state QKD with two independent
//! phase-randomized lasers.
//!
//! * [`photon`]: joint and Alice-conditioned photon-number statistics.
//! * [`bounds`]: vacuum / single-photon bounds and the GLLP key rate.
//! * [`sim`]: analytic channel model, Monte Carlo sampler, HOM scan.
//! * [`optimize`]: grid search over source settings and distance scans.
//! * [`io`]: run configuration, click-record CSV and statistics files.

pub mod bounds;
pub mod error;
pub mod io;
pub mod optimize;
pub mod photon;
pub mod sim;

pub use bounds::{key_rate, KeyRateParams, KeyRateReport, ObservedStatistics};
pub use error::{Error, Result};
pub use photon::{
    branch_distributions, Branch, BranchDistributions, Numerics, PulsePairParams,
    ThresholdDetector,
};
pub use sim::ChannelModel;
