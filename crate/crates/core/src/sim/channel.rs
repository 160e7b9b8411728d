use serde::Serialize;

use crate::bounds::{ObservedStatistics, BACKGROUND_ERROR_RATE};
use crate::error::{check_non_negative, check_range, Error, Result};
use crate::photon::{Branch, BranchDistributions, ThresholdDetector};

/// Loss budget between BS1 and Bob's detectors, plus Bob's detection pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelModel {
    alice_internal_loss_db: f64,
    fiber_length_km: f64,
    fiber_loss_db_per_km: f64,
    bob_detector: ThresholdDetector,
    misalignment: f64,
}

impl ChannelModel {
    pub const DEFAULT_ALICE_LOSS_DB: f64 = 9.0;
    pub const DEFAULT_FIBER_LOSS_DB_PER_KM: f64 = 0.2;

    pub fn new(
        alice_internal_loss_db: f64,
        fiber_length_km: f64,
        fiber_loss_db_per_km: f64,
        bob_detector: ThresholdDetector,
        misalignment: f64,
    ) -> Result<Self> {
        // infinite loss is allowed: it models a fully blocked channel
        let loss = |name, v: f64| {
            if v == f64::INFINITY {
                Ok(v)
            } else {
                check_non_negative(name, v)
            }
        };
        Ok(Self {
            alice_internal_loss_db: loss("alice_internal_loss_db", alice_internal_loss_db)?,
            fiber_length_km: check_non_negative("fiber_length_km", fiber_length_km)?,
            fiber_loss_db_per_km: check_non_negative("fiber_loss_db_per_km", fiber_loss_db_per_km)?,
            bob_detector,
            misalignment: check_range("misalignment", misalignment, 0.0, 0.5)?,
        })
    }

    pub fn with_fiber_length(&self, km: f64) -> Result<Self> {
        Self::new(
            self.alice_internal_loss_db,
            km,
            self.fiber_loss_db_per_km,
            self.bob_detector,
            self.misalignment,
        )
    }

    pub fn with_bob(&self, bob_detector: ThresholdDetector, misalignment: f64) -> Result<Self> {
        Self::new(
            self.alice_internal_loss_db,
            self.fiber_length_km,
            self.fiber_loss_db_per_km,
            bob_detector,
            misalignment,
        )
    }

    pub fn alice_internal_loss_db(&self) -> f64 {
        self.alice_internal_loss_db
    }

    pub fn fiber_length_km(&self) -> f64 {
        self.fiber_length_km
    }

    pub fn fiber_loss_db_per_km(&self) -> f64 {
        self.fiber_loss_db_per_km
    }

    pub fn bob_detector(&self) -> &ThresholdDetector {
        &self.bob_detector
    }

    pub fn misalignment(&self) -> f64 {
        self.misalignment
    }

    pub fn fiber_transmission(&self) -> f64 {
        db_to_transmission(self.fiber_length_km * self.fiber_loss_db_per_km)
    }

    /// Optical transmission from BS1 to Bob's detectors, excluding detector efficiency.
    pub fn optical_transmission(&self) -> f64 {
        db_to_transmission(self.alice_internal_loss_db) * self.fiber_transmission()
    }

    /// Overall per-photon detection probability `eta`.
    pub fn transmission(&self) -> f64 {
        self.optical_transmission() * self.bob_detector.eta_d()
    }

    /// Probability that at least one of Bob's two detectors fires on vacuum.
    pub fn dark_yield(&self) -> f64 {
        let eps = self.bob_detector.epsilon();
        1.0 - (1.0 - eps) * (1.0 - eps)
    }

    /// Yield `Y_n` of an `n`-photon pulse.
    pub fn yield_of(&self, n: usize) -> f64 {
        1.0 - (1.0 - self.dark_yield()) * (1.0 - self.transmission()).powi(n as i32)
    }

    /// `e_n Y_n`: background counts err half the time, signal counts with
    /// the misalignment probability.
    pub fn error_yield_of(&self, n: usize) -> f64 {
        let y0 = self.dark_yield();
        BACKGROUND_ERROR_RATE * y0 + self.misalignment * (self.yield_of(n) - y0)
    }
}

fn db_to_transmission(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Exact single-photon and vacuum quantities of the simulated channel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroundTruth {
    pub y0: f64,
    pub y1: f64,
    pub e1: f64,
    pub yields: Vec<f64>,
    pub error_yields: Vec<f64>,
}

/// Forward-model prediction together with its ground truth.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictedStatistics {
    pub observed: ObservedStatistics,
    pub truth: GroundTruth,
}

/// Gains and error rates implied by the threshold-detector yield model:
/// `Q^l = sum_n P_n^l Y_n`, `E^l Q^l = sum_n P_n^l e_n Y_n`.
pub fn predicted_statistics(
    dists: &BranchDistributions,
    ch: &ChannelModel,
) -> Result<PredictedStatistics> {
    let len = dists.n_max + 1;
    let yields: Vec<f64> = (0..len).map(|n| ch.yield_of(n)).collect();
    let error_yields: Vec<f64> = (0..len).map(|n| ch.error_yield_of(n)).collect();

    let branch = |b: Branch| {
        let p = dists.branch(b);
        let q: f64 = p.iter().zip(&yields).map(|(p, y)| p * y).sum();
        let eq: f64 = p.iter().zip(&error_yields).map(|(p, y)| p * y).sum();
        let e = if q > 0.0 { (eq / q).clamp(0.0, 1.0) } else { 0.0 };
        (q.clamp(0.0, 1.0), e)
    };
    let (q_c, e_c) = branch(Branch::Click);
    let (q_nc, e_nc) = branch(Branch::NoClick);

    let y1 = yields[1];
    Ok(PredictedStatistics {
        observed: ObservedStatistics::new(q_c, e_c, q_nc, e_nc)?,
        truth: GroundTruth {
            y0: yields[0],
            y1,
            e1: if y1 > 0.0 { error_yields[1] / y1 } else { 0.0 },
            yields,
            error_yields,
        },
    })
}

fn bisect(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let f_lo = f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if (f(mid) < 0.0) == (f_lo < 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves for Bob's detector pair (efficiency, dark counts) and the
/// misalignment so that the forward model reproduces the observed
/// no-click gain, no-click error rate and click error rate. The click gain
/// is left free and serves as a consistency check. Losses come from
/// `template`.
pub fn fit_channel(
    dists: &BranchDistributions,
    target: &ObservedStatistics,
    template: &ChannelModel,
) -> Result<ChannelModel> {
    let e0 = BACKGROUND_ERROR_RATE;
    let optical = template.optical_transmission();
    let mass_nc = dists.branch_probability(Branch::NoClick);
    let q_nc = target.gain(Branch::NoClick);
    let eq_nc = target.error_gain(Branch::NoClick);
    if q_nc <= 0.0 || target.gain(Branch::Click) <= 0.0 || optical <= 0.0 {
        return Err(Error::Fit("gains and optical transmission must be positive".into()));
    }

    let gain_nc = |eta: f64, y0: f64| -> f64 {
        dists
            .p_noclick
            .iter()
            .enumerate()
            .map(|(n, p)| p * (1.0 - (1.0 - y0) * (1.0 - eta).powi(n as i32)))
            .sum()
    };

    // For a given dark yield: efficiency from the no-click gain, then the
    // misalignment from the no-click error rate.
    let solve = |y0: f64| -> Result<ChannelModel> {
        if gain_nc(optical, y0) < q_nc {
            return Err(Error::Fit(format!(
                "no-click gain {q_nc:.4e} unreachable with unit detector efficiency"
            )));
        }
        let eta = bisect(0.0, optical, |eta| gain_nc(eta, y0) - q_nc);
        let signal = q_nc - y0 * mass_nc;
        let misalignment = if signal > 0.0 {
            ((eq_nc - e0 * y0 * mass_nc) / signal).clamp(0.0, 0.5)
        } else {
            0.0
        };
        let eps = 1.0 - (1.0 - y0).sqrt();
        let bob = ThresholdDetector::new(eps, (eta / optical).min(1.0))?;
        template.with_bob(bob, misalignment)
    };

    let click_error = |y0: f64| -> f64 {
        match solve(y0).and_then(|ch| predicted_statistics(dists, &ch)) {
            Ok(p) => p.observed.error_rate(Branch::Click) - target.error_rate(Branch::Click),
            Err(_) => f64::NAN,
        }
    };

    // misalignment >= 0 caps the dark yield
    let y0_max = (eq_nc / (e0 * mass_nc)).min(q_nc / mass_nc);
    let (lo, hi) = (click_error(0.0), click_error(y0_max));
    if !(lo.is_finite() && hi.is_finite()) || lo.signum() == hi.signum() {
        return Err(Error::Fit(format!(
            "click error rate not bracketed over dark yield [0, {y0_max:.3e}] ({lo:.3e}, {hi:.3e})"
        )));
    }
    let y0 = bisect(0.0, y0_max, click_error);
    solve(y0)
}
