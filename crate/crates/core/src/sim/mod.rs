//! Forward models of the full experiment: the analytic yield expansion,
//! the pulse-level Monte Carlo sampler, and the HOM coincidence scan.

pub mod channel;
pub mod hom;
pub mod monte_carlo;

pub use channel::{fit_channel, predicted_statistics, ChannelModel, GroundTruth, PredictedStatistics};
pub use hom::{hom_coincidence_scan, hom_coincidence_scan_with, HomRow, HomScan};
pub use monte_carlo::{
    monte_carlo_records, monte_carlo_run, ClickRecord, MonteCarloSummary, SiftCounts,
};
