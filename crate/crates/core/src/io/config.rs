//! JSON run configuration.
//!
//! Parsing happens in two phases so that malformed documents (syntax,
//! types, unknown fields) and out-of-domain values are reported as
//! distinct error kinds.

use serde::Deserialize;

use crate::bounds::KeyRateParams;
use crate::error::{Error, Result};
use crate::optimize::{AxisRange, SearchSpace, SourcePoint};
use crate::photon::{Numerics, PulsePairParams, ThresholdDetector};
use crate::photon::{DEFAULT_N_MAX, DEFAULT_TAIL_TOLERANCE, DEFAULT_THETA_NODES};
use crate::sim::ChannelModel;

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceSpec {
    mu1: f64,
    mu2: f64,
    t: f64,
    #[serde(default = "one")]
    overlap: f64,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct DetectorSpec {
    epsilon: f64,
    eta_d: f64,
}

impl DetectorSpec {
    fn build(&self) -> Result<ThresholdDetector> {
        ThresholdDetector::new(self.epsilon, self.eta_d)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelSpec {
    #[serde(default = "ChannelSpec::default_alice_loss")]
    alice_internal_loss_db: f64,
    fiber_length_km: f64,
    #[serde(default = "ChannelSpec::default_fiber_loss")]
    fiber_loss_db_per_km: f64,
    bob_detector: DetectorSpec,
    misalignment: f64,
}

impl ChannelSpec {
    fn default_alice_loss() -> f64 {
        ChannelModel::DEFAULT_ALICE_LOSS_DB
    }

    fn default_fiber_loss() -> f64 {
        ChannelModel::DEFAULT_FIBER_LOSS_DB_PER_KM
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct KeyParamsSpec {
    q: f64,
    f: f64,
    e0: f64,
}

impl Default for KeyParamsSpec {
    fn default() -> Self {
        let d = KeyRateParams::default();
        Self {
            q: d.q(),
            f: d.f(),
            e0: d.e0(),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct NumericsSpec {
    n_max: usize,
    theta_nodes: usize,
    tail_tolerance: f64,
}

impl Default for NumericsSpec {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            theta_nodes: DEFAULT_THETA_NODES,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct AxisSpec {
    lo: f64,
    hi: f64,
    points: usize,
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
struct PointSpec {
    mu1: f64,
    mu2: f64,
    t: f64,
}

fn default_levels() -> usize {
    2
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SearchSpec {
    mu1: AxisSpec,
    mu2: AxisSpec,
    t: AxisSpec,
    #[serde(default = "default_levels")]
    refinement_levels: usize,
    #[serde(default)]
    include: Vec<PointSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunConfigSpec {
    source: SourceSpec,
    alice_detector: DetectorSpec,
    #[serde(default)]
    channel: Option<ChannelSpec>,
    #[serde(default)]
    key_params: KeyParamsSpec,
    #[serde(default)]
    numerics: NumericsSpec,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    search: Option<SearchSpec>,
    #[serde(default)]
    lengths_km: Option<Vec<f64>>,
}

/// Grid description of the `search` section.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchSettings {
    pub mu1: AxisRange,
    pub mu2: AxisRange,
    pub t: AxisRange,
    pub refinement_levels: usize,
    pub include: Vec<SourcePoint>,
}

/// A validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub source: PulsePairParams,
    pub alice_detector: ThresholdDetector,
    pub channel: Option<ChannelModel>,
    pub key_params: KeyRateParams,
    pub numerics: Numerics,
    pub seed: u64,
    pub search: Option<SearchSettings>,
    pub lengths_km: Option<Vec<f64>>,
}

impl RunConfig {
    /// Parses and validates a JSON configuration document.
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: RunConfigSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "config".into(),
            message: e.to_string(),
        })?;
        Self::from_spec(spec)
    }

    fn from_spec(spec: RunConfigSpec) -> Result<Self> {
        let s = &spec.source;
        let source = PulsePairParams::with_overlap(s.mu1, s.mu2, s.t, s.overlap)?;
        let alice_detector = spec.alice_detector.build()?;
        let channel = spec
            .channel
            .as_ref()
            .map(|c| {
                ChannelModel::new(
                    c.alice_internal_loss_db,
                    c.fiber_length_km,
                    c.fiber_loss_db_per_km,
                    c.bob_detector.build()?,
                    c.misalignment,
                )
            })
            .transpose()?;
        let k = &spec.key_params;
        let key_params = KeyRateParams::with_background(k.q, k.f, k.e0)?;
        let numerics = Numerics {
            n_max: spec.numerics.n_max,
            theta_nodes: spec.numerics.theta_nodes,
            tail_tolerance: spec.numerics.tail_tolerance,
        };
        numerics.validate()?;
        let axis = |a: &AxisSpec| AxisRange::new(a.lo, a.hi, a.points);
        let search = spec.search.as_ref().map(|s| SearchSettings {
            mu1: axis(&s.mu1),
            mu2: axis(&s.mu2),
            t: axis(&s.t),
            refinement_levels: s.refinement_levels,
            include: s
                .include
                .iter()
                .map(|p| SourcePoint::new(p.mu1, p.mu2, p.t))
                .collect(),
        });
        if let Some(lengths) = &spec.lengths_km {
            for &km in lengths {
                if !(km.is_finite() && km >= 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "lengths_km",
                        value: km,
                        reason: "must be finite and non-negative",
                    });
                }
            }
        }
        let cfg = RunConfig {
            source,
            alice_detector,
            channel,
            key_params,
            numerics,
            seed: spec.seed,
            search,
            lengths_km: spec.lengths_km,
        };
        if cfg.search.is_some() {
            cfg.search_space()?;
        }
        Ok(cfg)
    }

    pub fn require_channel(&self) -> Result<&ChannelModel> {
        self.channel.as_ref().ok_or(Error::InvalidParameter {
            name: "channel",
            value: f64::NAN,
            reason: "this command needs a channel section",
        })
    }

    /// Search space of the `search` section over the configured channel.
    pub fn search_space(&self) -> Result<SearchSpace> {
        let s = self.search.as_ref().ok_or(Error::InvalidParameter {
            name: "search",
            value: f64::NAN,
            reason: "this command needs a search section",
        })?;
        let space = SearchSpace {
            mu1: s.mu1,
            mu2: s.mu2,
            t: s.t,
            overlap: self.source.overlap(),
            detector: self.alice_detector,
            channel: *self.require_channel()?,
            key_params: self.key_params,
            numerics: self.numerics,
            refinement_levels: s.refinement_levels,
            include: s.include.clone(),
        };
        space.validate()?;
        Ok(space)
    }
}
