//! Decoy-state bound chain and GLLP key rate for the passive source.
//!
//! Every quantity indexed by a branch is a joint probability per emitted
//! pulse: `P_n^l` is the probability of `n` photons in mode a *and* outcome
//! `l` at Alice's detector, and `Q^l` the probability of outcome `l` *and* a
//! detection at Bob. The no-click and total statistics act as the two decoy
//! settings; the click statistics enter only through the totals and through
//! their own rate term.

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::photon::{Branch, BranchDistributions};

/// Absolute guard below which a bound denominator is treated as zero.
pub const DENOMINATOR_GUARD: f64 = 1e-15;

/// Error rate of a purely random (background) detection.
pub const BACKGROUND_ERROR_RATE: f64 = 0.5;

/// Measured or simulated gains and error rates per Alice branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservedStatistics {
    q_c: f64,
    e_c: f64,
    q_nc: f64,
    e_nc: f64,
}

impl ObservedStatistics {
    pub fn new(q_c: f64, e_c: f64, q_nc: f64, e_nc: f64) -> Result<Self> {
        Ok(Self {
            q_c: check_range("q_c", q_c, 0.0, 1.0)?,
            e_c: check_range("e_c", e_c, 0.0, 1.0)?,
            q_nc: check_range("q_nc", q_nc, 0.0, 1.0)?,
            e_nc: check_range("e_nc", e_nc, 0.0, 1.0)?,
        })
    }

    pub fn gain(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Click => self.q_c,
            Branch::NoClick => self.q_nc,
        }
    }

    pub fn error_rate(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Click => self.e_c,
            Branch::NoClick => self.e_nc,
        }
    }

    /// `E^l Q^l`.
    pub fn error_gain(&self, branch: Branch) -> f64 {
        self.gain(branch) * self.error_rate(branch)
    }

    /// `Q^t = Q^c + Q^nc`.
    pub fn q_total(&self) -> f64 {
        self.q_c + self.q_nc
    }

    /// `E^t Q^t = E^c Q^c + E^nc Q^nc`.
    pub fn error_gain_total(&self) -> f64 {
        self.error_gain(Branch::Click) + self.error_gain(Branch::NoClick)
    }

    /// `E^t`, or 0 when nothing was detected.
    pub fn e_total(&self) -> f64 {
        let q = self.q_total();
        if q > 0.0 {
            self.error_gain_total() / q
        } else {
            0.0
        }
    }
}

/// Protocol constants of the rate formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct KeyRateParams {
    q: f64,
    f: f64,
    e0: f64,
}

impl Default for KeyRateParams {
    fn default() -> Self {
        Self {
            q: 0.5,
            f: 1.22,
            e0: BACKGROUND_ERROR_RATE,
        }
    }
}

impl KeyRateParams {
    /// Sifting efficiency `q` in (0, 1] and error-correction inefficiency `f >= 1`.
    pub fn new(q: f64, f: f64) -> Result<Self> {
        Self::with_background(q, f, BACKGROUND_ERROR_RATE)
    }

    pub fn with_background(q: f64, f: f64, e0: f64) -> Result<Self> {
        if !(q > 0.0 && q <= 1.0) {
            return Err(Error::InvalidParameter {
                name: "q",
                value: q,
                reason: "must lie in (0, 1]",
            });
        }
        if !f.is_finite() {
            return Err(Error::InvalidParameter {
                name: "f",
                value: f,
                reason: "must be at least 1",
            });
        }
        Ok(Self {
            q,
            f: check_range("f", f, 1.0, f64::INFINITY)?,
            e0: check_range("e0", e0, 0.0, 1.0)?,
        })
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn f(&self) -> f64 {
        self.f
    }

    pub fn e0(&self) -> f64 {
        self.e0
    }
}

/// Binary Shannon entropy in bits.
pub fn binary_entropy(x: f64) -> Result<f64> {
    check_range("x", x, 0.0, 1.0)?;
    if x == 0.0 || x == 1.0 {
        return Ok(0.0);
    }
    Ok(-x * x.log2() - (1.0 - x) * (1.0 - x).log2())
}

fn guard(what: &'static str, value: f64) -> Result<f64> {
    if value.abs() < DENOMINATOR_GUARD || !value.is_finite() {
        return Err(Error::DegenerateDenominator { what, value });
    }
    Ok(value)
}

/// Vacuum-yield bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Y0Bounds {
    pub lower: f64,
    pub upper: f64,
    /// Branch whose clause attains the minimum in `upper`.
    pub upper_branch: Branch,
    /// Lower-bound ratio before clamping.
    pub lower_raw: f64,
    pub lower_denominator: f64,
    /// Set when the clamped lower bound exceeded `upper` and was capped to it.
    pub lower_capped_by_upper: bool,
}

pub fn y0_bounds(
    dists: &BranchDistributions,
    obs: &ObservedStatistics,
    params: &KeyRateParams,
) -> Result<Y0Bounds> {
    let (pc, pnc, pt) = (&dists.p_click, &dists.p_noclick, &dists.p_total);
    guard("P_0^c", pc[0])?;
    guard("P_0^nc", pnc[0])?;

    let upper_c = obs.error_gain(Branch::Click) / (pc[0] * params.e0);
    let upper_nc = obs.error_gain(Branch::NoClick) / (pnc[0] * params.e0);
    let (upper, upper_branch) = if upper_nc < upper_c {
        (upper_nc, Branch::NoClick)
    } else {
        (upper_c, Branch::Click)
    };

    let denominator = guard("Y_0^L", pt[1] * pnc[0] - pnc[1] * pt[0])?;
    let lower_raw = (pt[1] * obs.gain(Branch::NoClick) - pnc[1] * obs.q_total()) / denominator;
    let clamped = lower_raw.max(0.0);
    let lower_capped_by_upper = clamped > upper;
    Ok(Y0Bounds {
        lower: clamped.min(upper),
        upper,
        upper_branch,
        lower_raw,
        lower_denominator: denominator,
        lower_capped_by_upper,
    })
}

/// Coefficients of the single-photon bound: `Y_1 >= slope - offset * Y_0^U`.
#[derive(Debug, Clone, Copy)]
struct DecoyCoefficients {
    slope: f64,
    offset: f64,
    denominator: f64,
}

fn decoy_coefficients(
    dists: &BranchDistributions,
    obs: &ObservedStatistics,
) -> Result<DecoyCoefficients> {
    let (pnc, pt) = (&dists.p_noclick, &dists.p_total);
    let denominator = guard("Y_1^L", pt[2] * pnc[1] - pnc[2] * pt[1])?;
    Ok(DecoyCoefficients {
        slope: (pt[2] * obs.gain(Branch::NoClick) - pnc[2] * obs.q_total()) / denominator,
        offset: (pt[2] * pnc[0] - pnc[2] * pt[0]) / denominator,
        denominator,
    })
}

/// Lower bound on `P_1^l Y_1 + P_0^l Y_0` for one branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SinglePhotonBound {
    pub branch: Branch,
    pub combined: f64,
    /// Value before the outer `max{., 0}`.
    pub combined_raw: f64,
    pub denominator: f64,
}

pub fn single_photon_bound(
    dists: &BranchDistributions,
    obs: &ObservedStatistics,
    y0_upper: f64,
    branch: Branch,
) -> Result<SinglePhotonBound> {
    let k = decoy_coefficients(dists, obs)?;
    let p = dists.branch(branch);
    let combined_raw = p[1] * k.slope + (p[0] - p[1] * k.offset) * y0_upper;
    Ok(SinglePhotonBound {
        branch,
        combined: combined_raw.max(0.0),
        combined_raw,
        denominator: k.denominator,
    })
}

/// `Y_1^L`: the combined bound divided through by `P_1^l`, which is the
/// same for both branches.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Y1Lower {
    pub value: f64,
    pub raw: f64,
    pub denominator: f64,
}

pub fn y1_lower(
    dists: &BranchDistributions,
    obs: &ObservedStatistics,
    y0_upper: f64,
) -> Result<Y1Lower> {
    let k = decoy_coefficients(dists, obs)?;
    let raw = k.slope - k.offset * y0_upper;
    Ok(Y1Lower {
        value: raw.max(0.0),
        raw,
        denominator: k.denominator,
    })
}

/// Upper bound on the single-photon error rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct E1Upper {
    pub value: f64,
    /// The click, no-click and total-combination clauses, in that order.
    pub clauses: [f64; 3],
    /// 1-based index of the clause attaining the minimum.
    pub active_clause: usize,
}

pub fn e1_upper(
    dists: &BranchDistributions,
    obs: &ObservedStatistics,
    y0_lower: f64,
    y1_lower: f64,
    params: &KeyRateParams,
) -> Result<E1Upper> {
    if y1_lower <= 0.0 {
        return Err(Error::NoSinglePhotonYield);
    }
    let (pc, pnc, pt) = (&dists.p_click, &dists.p_noclick, &dists.p_total);
    let e0 = params.e0;
    let mix = guard("e_1^U total clause", pt[1] * pnc[0] - pnc[1] * pt[0])?;
    let clauses = [
        (obs.error_gain(Branch::Click) - pc[0] * y0_lower * e0)
            / (guard("P_1^c", pc[1])? * y1_lower),
        (obs.error_gain(Branch::NoClick) - pnc[0] * y0_lower * e0)
            / (guard("P_1^nc", pnc[1])? * y1_lower),
        (pnc[0] * obs.error_gain_total() - pt[0] * obs.error_gain(Branch::NoClick))
            / (mix * y1_lower),
    ];
    let mut active = 0;
    for i in 1..3 {
        if clauses[i] < clauses[active] {
            active = i;
        }
    }
    Ok(E1Upper {
        value: clauses[active].max(0.0),
        clauses,
        active_clause: active + 1,
    })
}

/// Intermediate values and active clauses of one key-rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateDiagnostics {
    pub y0_lower_raw: f64,
    pub y0_lower_denominator: f64,
    pub y0_lower_capped_by_upper: bool,
    pub y0_upper_branch: Branch,
    pub y1_lower_raw: f64,
    pub y1_denominator: f64,
    pub combined_raw_c: f64,
    pub combined_raw_nc: f64,
    pub e1_clauses: Option<[f64; 3]>,
    pub e1_active_clause: Option<usize>,
    /// `[1 - H(e_1^U)]` was clamped to 0 because `e_1^U >= 1/2`.
    pub entropy_clamped: bool,
    /// `Y_1^L = 0`; the rate is zero by construction.
    pub no_single_photon_yield: bool,
}

/// Full bound chain and per-branch rates, in bits per pulse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KeyRateReport {
    pub y0_lower: f64,
    pub y0_upper: f64,
    pub combined_lower_c: f64,
    pub combined_lower_nc: f64,
    pub y1_lower: f64,
    pub e1_upper: Option<f64>,
    pub r_c: f64,
    pub r_nc: f64,
    pub r_total: f64,
    pub diagnostics: KeyRateDiagnostics,
}

impl KeyRateReport {
    pub fn rate(&self, branch: Branch) -> f64 {
        match branch {
            Branch::Click => self.r_c,
            Branch::NoClick => self.r_nc,
        }
    }
}

/// Runs the complete chain: vacuum bounds, single-photon bounds per branch,
/// single-photon error bound, per-branch GLLP rates, and the clamped sum.
pub fn key_rate(
    dists: &BranchDistributions,
    obs: &ObservedStatistics,
    params: &KeyRateParams,
) -> Result<KeyRateReport> {
    let y0 = y0_bounds(dists, obs, params)?;
    let combined_c = single_photon_bound(dists, obs, y0.upper, Branch::Click)?;
    let combined_nc = single_photon_bound(dists, obs, y0.upper, Branch::NoClick)?;
    let y1 = y1_lower(dists, obs, y0.upper)?;

    let (e1, privacy_factor, entropy_clamped) =
        match e1_upper(dists, obs, y0.lower, y1.value, params) {
            Ok(e1) if e1.value >= 0.5 => (Some(e1), 0.0, true),
            Ok(e1) => (Some(e1), 1.0 - binary_entropy(e1.value)?, false),
            Err(Error::NoSinglePhotonYield) => (None, 0.0, false),
            Err(e) => return Err(e),
        };

    let branch_rate = |branch: Branch, combined: f64| -> Result<f64> {
        let e = obs.error_rate(branch);
        let correction = obs.gain(branch) * params.f * binary_entropy(e)?;
        Ok(params.q * (-correction + combined * privacy_factor))
    };
    let r_c = branch_rate(Branch::Click, combined_c.combined)?;
    let r_nc = branch_rate(Branch::NoClick, combined_nc.combined)?;

    Ok(KeyRateReport {
        y0_lower: y0.lower,
        y0_upper: y0.upper,
        combined_lower_c: combined_c.combined,
        combined_lower_nc: combined_nc.combined,
        y1_lower: y1.value,
        e1_upper: e1.map(|e| e.value),
        r_c,
        r_nc,
        r_total: r_c.max(0.0) + r_nc.max(0.0),
        diagnostics: KeyRateDiagnostics {
            y0_lower_raw: y0.lower_raw,
            y0_lower_denominator: y0.lower_denominator,
            y0_lower_capped_by_upper: y0.lower_capped_by_upper,
            y0_upper_branch: y0.upper_branch,
            y1_lower_raw: y1.raw,
            y1_denominator: y1.denominator,
            combined_raw_c: combined_c.combined_raw,
            combined_raw_nc: combined_nc.combined_raw,
            e1_clauses: e1.map(|e| e.clauses),
            e1_active_clause: e1.map(|e| e.active_clause),
            entropy_clamped,
            no_single_photon_yield: e1.is_none(),
        },
    })
}
