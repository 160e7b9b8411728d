//! Serializable report documents and their text encodings.

use std::fmt::Write as _;

use pdqkd::bounds::{KeyRateParams, KeyRateReport, ObservedStatistics};
use pdqkd::optimize::{DistanceRow, OptimizationResult, SourcePoint};
use pdqkd::photon::{branch_mean, g2, Branch, BranchDistributions, Numerics};
use pdqkd::photon::{PulsePairParams, ThresholdDetector};
use pdqkd::sim::{ChannelModel, MonteCarloSummary, SiftCounts};
use serde::Serialize;

/// A per-branch pair of values, plus the branch-agnostic total where defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerBranch<T> {
    pub click: T,
    pub noclick: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Moments {
    pub click: Option<f64>,
    pub noclick: Option<f64>,
    pub total: Option<f64>,
}

impl Moments {
    fn of(dists: &BranchDistributions, f: fn(&[f64]) -> pdqkd::Result<f64>) -> Self {
        Self {
            click: f(&dists.p_click).ok(),
            noclick: f(&dists.p_noclick).ok(),
            total: f(&dists.p_total).ok(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DistributionReport {
    pub source: PulsePairParams,
    pub alice_detector: ThresholdDetector,
    pub numerics: Numerics,
    pub poisson_reduction: bool,
    pub branch_probability: PerBranch<f64>,
    pub mean_photon_number: Moments,
    pub g2: Moments,
    pub distributions: BranchDistributions,
}

impl DistributionReport {
    pub fn new(
        source: PulsePairParams,
        alice_detector: ThresholdDetector,
        numerics: Numerics,
        distributions: BranchDistributions,
    ) -> Self {
        Self {
            source,
            alice_detector,
            numerics,
            poisson_reduction: source.is_poisson_reduced(),
            branch_probability: PerBranch {
                click: distributions.branch_probability(Branch::Click),
                noclick: distributions.branch_probability(Branch::NoClick),
            },
            mean_photon_number: Moments::of(&distributions, branch_mean),
            g2: Moments::of(&distributions, g2),
            distributions,
        }
    }

    pub fn to_csv(&self) -> String {
        let d = &self.distributions;
        let mut out = String::from("n,p_click,p_noclick,p_total\n");
        for n in 0..=d.n_max {
            let _ = writeln!(out, "{n},{},{},{}", d.p_click[n], d.p_noclick[n], d.p_total[n]);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StatisticsSummary {
    #[serde(flatten)]
    pub observed: ObservedStatistics,
    pub q_total: f64,
    pub e_total: f64,
}

impl From<ObservedStatistics> for StatisticsSummary {
    fn from(observed: ObservedStatistics) -> Self {
        Self {
            observed,
            q_total: observed.q_total(),
            e_total: observed.e_total(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateDocument {
    pub source: PulsePairParams,
    pub alice_detector: ThresholdDetector,
    pub key_params: KeyRateParams,
    pub numerics: Numerics,
    pub statistics: StatisticsSummary,
    pub result: KeyRateReport,
    pub key_generated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationDocument {
    #[serde(flatten)]
    pub observed: ObservedStatistics,
    pub pulses: u64,
    pub seed: u64,
    pub records_file: Option<String>,
    pub counts: SiftCounts,
    pub photon_histogram: PerBranch<Vec<u64>>,
    pub photon_overflow: PerBranch<u64>,
    pub predicted: ObservedStatistics,
    pub source: PulsePairParams,
    pub alice_detector: ThresholdDetector,
    pub channel: ChannelModel,
}

impl SimulationDocument {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        summary: &MonteCarloSummary,
        pulses: u64,
        records_file: Option<String>,
        predicted: ObservedStatistics,
        source: PulsePairParams,
        alice_detector: ThresholdDetector,
        channel: ChannelModel,
    ) -> pdqkd::Result<Self> {
        Ok(Self {
            observed: summary.observed()?,
            pulses,
            seed: summary.seed,
            records_file,
            counts: summary.counts,
            photon_histogram: PerBranch {
                click: summary.histogram(Branch::Click).to_vec(),
                noclick: summary.histogram(Branch::NoClick).to_vec(),
            },
            photon_overflow: PerBranch {
                click: summary.photon_overflow[0],
                noclick: summary.photon_overflow[1],
            },
            predicted,
            source,
            alice_detector,
            channel,
        })
    }
}

pub fn optimization_csv(result: &OptimizationResult) -> String {
    let mut out = String::from("level,mu1,mu2,t,rate,feasible\n");
    for e in &result.trace {
        let p = e.point;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            e.level, p.mu1, p.mu2, p.t, e.rate, e.feasible as u8
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanDocument {
    pub point: SourcePoint,
    pub channel: ChannelModel,
    pub rows: Vec<DistanceRow>,
}

pub fn scan_csv(rows: &[DistanceRow]) -> String {
    let mut out = String::from("length_km,rate\n");
    for r in rows {
        let _ = writeln!(out, "{},{}", r.length_km, r.rate);
    }
    out
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    text
}
