//! Nested grid search over the source settings and rate-versus-distance scans.
//!
//! The objective is the asymptotic key rate of the analytic forward model.
//! It is piecewise-defined through the clamps of the bound chain, so the
//! search refines a box around the incumbent instead of following gradients.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::{key_rate, KeyRateParams};
use crate::error::{Error, Result};
use crate::photon::{branch_distributions, Numerics, PulsePairParams, ThresholdDetector};
use crate::sim::{predicted_statistics, ChannelModel};

/// Box shrink factor between refinement levels.
pub const SHRINK_FACTOR: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SourcePoint {
    pub mu1: f64,
    pub mu2: f64,
    pub t: f64,
}

impl SourcePoint {
    pub fn new(mu1: f64, mu2: f64, t: f64) -> Self {
        Self { mu1, mu2, t }
    }

    fn lex_cmp(&self, other: &Self) -> Ordering {
        self.mu1
            .total_cmp(&other.mu1)
            .then(self.mu2.total_cmp(&other.mu2))
            .then(self.t.total_cmp(&other.t))
    }
}

/// Closed interval sampled at `points` equally spaced values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisRange {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl AxisRange {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points }
    }

    /// Degenerate single-value axis.
    pub fn fixed(value: f64) -> Self {
        Self::new(value, value, 1)
    }

    fn validate(&self, name: &'static str, min: f64, max: f64) -> Result<()> {
        let bad = |reason| {
            Err(Error::InvalidParameter {
                name,
                value: self.lo,
                reason,
            })
        };
        if !(self.lo.is_finite() && self.hi.is_finite()) || self.lo > self.hi {
            return bad("range bounds must be finite with lo <= hi");
        }
        if self.lo < min || self.hi > max {
            return bad("range leaves the parameter's validity domain");
        }
        if self.lo < self.hi && self.points < 2 {
            return bad("a non-degenerate axis needs at least 2 points");
        }
        if self.points == 0 {
            return bad("an axis needs at least 1 point");
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        if self.lo == self.hi || self.points < 2 {
            return vec![self.lo];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| {
                if i + 1 == self.points {
                    self.hi
                } else {
                    self.lo + i as f64 * step
                }
            })
            .collect()
    }

    pub fn spacing(&self) -> f64 {
        if self.points < 2 {
            0.0
        } else {
            (self.hi - self.lo) / (self.points - 1) as f64
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    /// Sub-interval of width `width / SHRINK_FACTOR` centred on `center`,
    /// shifted to stay inside `bounds`.
    fn shrink_around(&self, center: f64, bounds: &AxisRange) -> AxisRange {
        let half = 0.5 * (self.hi - self.lo) / SHRINK_FACTOR;
        let (mut lo, mut hi) = (center - half, center + half);
        if lo < bounds.lo {
            hi += bounds.lo - lo;
            lo = bounds.lo;
        }
        if hi > bounds.hi {
            lo -= hi - bounds.hi;
            hi = bounds.hi;
        }
        AxisRange::new(lo.max(bounds.lo), hi.min(bounds.hi), self.points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SearchSpace {
    pub mu1: AxisRange,
    pub mu2: AxisRange,
    pub t: AxisRange,
    pub overlap: f64,
    pub detector: ThresholdDetector,
    pub channel: ChannelModel,
    pub key_params: KeyRateParams,
    pub numerics: Numerics,
    pub refinement_levels: usize,
    /// Extra points scored alongside the coarse grid.
    pub include: Vec<SourcePoint>,
}

impl SearchSpace {
    pub fn validate(&self) -> Result<()> {
        self.mu1.validate("mu1_range", 0.0, f64::INFINITY)?;
        self.mu2.validate("mu2_range", 0.0, f64::INFINITY)?;
        self.t.validate("t_range", 0.0, 1.0)?;
        self.numerics.validate()?;
        if self.refinement_levels == 0 {
            return Err(Error::InvalidParameter {
                name: "refinement_levels",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        for p in &self.include {
            if !(self.mu1.contains(p.mu1) && self.mu2.contains(p.mu2) && self.t.contains(p.t)) {
                return Err(Error::InvalidParameter {
                    name: "include",
                    value: p.mu1,
                    reason: "included point lies outside the search box",
                });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Evaluation {
    pub level: usize,
    pub point: SourcePoint,
    pub rate: f64,
    /// False when the bound chain rejected the point (e.g. degenerate decoys).
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LevelSummary {
    pub level: usize,
    pub mu1: AxisRange,
    pub mu2: AxisRange,
    pub t: AxisRange,
    pub best_point: SourcePoint,
    pub best_rate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub best_point: SourcePoint,
    pub best_rate: f64,
    /// Every coarse-grid rate was zero; the channel is too lossy.
    pub no_positive_rate: bool,
    pub trace: Vec<Evaluation>,
    pub refinement_history: Vec<LevelSummary>,
}

/// Key rate predicted by the analytic forward model at one source setting.
pub fn evaluate_rate(
    point: &SourcePoint,
    overlap: f64,
    det: &ThresholdDetector,
    ch: &ChannelModel,
    key_params: &KeyRateParams,
    numerics: &Numerics,
) -> Result<f64> {
    let params = PulsePairParams::with_overlap(point.mu1, point.mu2, point.t, overlap)?;
    let dists = branch_distributions(&params, det, numerics)?;
    let predicted = predicted_statistics(&dists, ch)?;
    Ok(key_rate(&dists, &predicted.observed, key_params)?.r_total)
}

/// Higher rate wins; equal rates go to the lexicographically smaller point.
fn better(a: &Evaluation, b: &Evaluation) -> bool {
    match a.rate.total_cmp(&b.rate) {
        Ordering::Greater => true,
        Ordering::Less => false,
        Ordering::Equal => a.point.lex_cmp(&b.point) == Ordering::Less,
    }
}

fn argmax(evals: &[Evaluation]) -> Option<Evaluation> {
    evals.iter().fold(None, |best, e| match best {
        Some(b) if !better(e, &b) => Some(b),
        _ => Some(*e),
    })
}

fn grid(mu1: &AxisRange, mu2: &AxisRange, t: &AxisRange) -> Vec<SourcePoint> {
    let (a, b, c) = (mu1.values(), mu2.values(), t.values());
    let mut points = Vec::with_capacity(a.len() * b.len() * c.len());
    for &x in &a {
        for &y in &b {
            for &z in &c {
                points.push(SourcePoint::new(x, y, z));
            }
        }
    }
    points
}

/// Multi-level grid search. Each level re-grids a box `SHRINK_FACTOR`
/// times narrower per axis, centred on the incumbent.
pub fn optimize(space: &SearchSpace) -> Result<OptimizationResult> {
    space.validate()?;
    let score = |level: usize, points: &[SourcePoint]| -> Vec<Evaluation> {
        points
            .par_iter()
            .map(|p| {
                let r = evaluate_rate(
                    p,
                    space.overlap,
                    &space.detector,
                    &space.channel,
                    &space.key_params,
                    &space.numerics,
                );
                Evaluation {
                    level,
                    point: *p,
                    rate: *r.as_ref().unwrap_or(&0.0),
                    feasible: r.is_ok(),
                }
            })
            .collect()
    };

    let (mut mu1, mut mu2, mut t) = (space.mu1, space.mu2, space.t);
    let mut points = grid(&mu1, &mu2, &t);
    for p in &space.include {
        if !points.iter().any(|q| q.lex_cmp(p) == Ordering::Equal) {
            points.push(*p);
        }
    }

    let mut trace = Vec::new();
    let mut history = Vec::new();
    let mut incumbent: Option<Evaluation> = None;
    for level in 0..space.refinement_levels {
        if level > 0 {
            let c = incumbent.expect("level 0 always scores at least one point").point;
            mu1 = mu1.shrink_around(c.mu1, &space.mu1);
            mu2 = mu2.shrink_around(c.mu2, &space.mu2);
            t = t.shrink_around(c.t, &space.t);
            points = grid(&mu1, &mu2, &t);
        }
        let evals = score(level, &points);
        let level_best = argmax(&evals).expect("grid is never empty");
        incumbent = match incumbent {
            Some(inc) if !better(&level_best, &inc) => Some(inc),
            _ => Some(level_best),
        };
        let inc = incumbent.expect("set above");
        history.push(LevelSummary {
            level,
            mu1,
            mu2,
            t,
            best_point: inc.point,
            best_rate: inc.rate,
            evaluations: evals.len(),
        });
        trace.extend(evals);
        if level == 0 && inc.rate <= 0.0 {
            break;
        }
    }

    let best = incumbent.expect("at least one level ran");
    Ok(OptimizationResult {
        best_point: best.point,
        best_rate: best.rate,
        no_positive_rate: best.rate <= 0.0,
        trace,
        refinement_history: history,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DistanceRow {
    pub length_km: f64,
    pub rate: f64,
}

/// Key rate through the full chain at each fiber length, rows sorted by length.
pub fn scan_rate_vs_distance(
    params: &PulsePairParams,
    det: &ThresholdDetector,
    ch_template: &ChannelModel,
    lengths: &[f64],
    key_params: &KeyRateParams,
    numerics: &Numerics,
) -> Result<Vec<DistanceRow>> {
    if lengths.is_empty() {
        return Err(Error::InvalidParameter {
            name: "lengths",
            value: 0.0,
            reason: "at least one length is required",
        });
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_by(f64::total_cmp);
    let dists = branch_distributions(params, det, numerics)?;
    sorted
        .iter()
        .map(|&km| {
            let ch = ch_template.with_fiber_length(km)?;
            let predicted = predicted_statistics(&dists, &ch)?;
            Ok(DistanceRow {
                length_km: km,
                rate: key_rate(&dists, &predicted.observed, key_params)?.r_total,
            })
        })
        .collect()
}
