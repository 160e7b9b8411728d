//! Photon-number statistics of the passive decoy source.
//!
//! Two independent phase-randomized coherent pulses (intensities `mu1`,
//! `mu2`) meet on a beam splitter of transmittance `t`. For a fixed relative
//! phase `theta` the output modes are independent coherent states with
//! intensities `nu * gamma(theta)` (mode a, sent to Bob) and
//! `nu * (1 - gamma(theta))` (mode b, watched by Alice's threshold detector).
//! Phase averaging turns the pair into a correlated Poisson mixture, and
//! conditioning on Alice's click / no-click outcome produces the two
//! non-Poissonian decoy distributions.
//!
//! The phase average is a composite midpoint rule on `[0, 2pi)`. The
//! integrand is smooth and periodic so the rule converges spectrally.

use std::f64::consts::PI;
use std::fmt;
use std::sync::OnceLock;

use serde::Serialize;

use crate::error::{check_non_negative, check_range, Error, Result};

/// Hard cap on any photon number handled by the quadrature routines.
pub const MAX_PHOTON_NUMBER: usize = 60;
pub const DEFAULT_N_MAX: usize = 20;
pub const DEFAULT_THETA_NODES: usize = 256;
pub const DEFAULT_TAIL_TOLERANCE: f64 = 1e-12;

fn ln_factorial_table() -> &'static [f64; MAX_PHOTON_NUMBER + 1] {
    static TABLE: OnceLock<[f64; MAX_PHOTON_NUMBER + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut table = [0.0; MAX_PHOTON_NUMBER + 1];
        for k in 1..=MAX_PHOTON_NUMBER {
            table[k] = table[k - 1] + (k as f64).ln();
        }
        table
    })
}

/// `ln(n!)` for `n <= MAX_PHOTON_NUMBER`.
pub fn ln_factorial(n: usize) -> f64 {
    ln_factorial_table()[n]
}

/// Poisson probability mass `e^{-mean} mean^n / n!`, evaluated in log space.
///
/// `n` must not exceed [`MAX_PHOTON_NUMBER`].
pub fn poisson_pmf(mean: f64, n: usize) -> f64 {
    if mean <= 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    if n == 0 {
        return (-mean).exp();
    }
    (n as f64 * mean.ln() - mean - ln_factorial(n)).exp()
}

/// Source-side physics of the two-laser passive decoy source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PulsePairParams {
    mu1: f64,
    mu2: f64,
    t: f64,
    overlap: f64,
}

impl PulsePairParams {
    /// Fully indistinguishable lasers (`overlap = 1`).
    pub fn new(mu1: f64, mu2: f64, t: f64) -> Result<Self> {
        Self::with_overlap(mu1, mu2, t, 1.0)
    }

    pub fn with_overlap(mu1: f64, mu2: f64, t: f64, overlap: f64) -> Result<Self> {
        Ok(Self {
            mu1: check_non_negative("mu1", mu1)?,
            mu2: check_non_negative("mu2", mu2)?,
            t: check_range("t", t, 0.0, 1.0)?,
            overlap: check_range("overlap", overlap, 0.0, 1.0)?,
        })
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn overlap(&self) -> f64 {
        self.overlap
    }

    /// Total intensity `nu = mu1 + mu2`.
    pub fn nu(&self) -> f64 {
        self.mu1 + self.mu2
    }

    /// Interference amplitude `xi`, scaled by the mode overlap.
    pub fn xi(&self) -> f64 {
        2.0 * self.overlap * (self.mu1 * self.mu2 * (1.0 - self.t) * self.t).sqrt()
    }

    /// True when the interference term vanishes and the output modes are
    /// independent Poisson sources.
    pub fn is_poisson_reduced(&self) -> bool {
        self.xi() == 0.0
    }

    pub fn kernel(&self) -> InterferenceKernel {
        InterferenceKernel {
            nu: self.nu(),
            xi: self.xi(),
            mean_a: self.mu1 * self.t + self.mu2 * (1.0 - self.t),
            mean_b: self.mu1 * (1.0 - self.t) + self.mu2 * self.t,
        }
    }
}

/// Phase-dependent split of the total intensity between the two outputs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceKernel {
    nu: f64,
    xi: f64,
    mean_a: f64,
    mean_b: f64,
}

impl InterferenceKernel {
    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn xi(&self) -> f64 {
        self.xi
    }

    /// Mean photon number in mode a at relative phase `theta`.
    pub fn mode_a_intensity(&self, theta: f64) -> f64 {
        (self.mean_a + self.xi * theta.cos()).clamp(0.0, self.nu)
    }

    /// Mean photon number in mode b at relative phase `theta`.
    pub fn mode_b_intensity(&self, theta: f64) -> f64 {
        (self.mean_b - self.xi * theta.cos()).clamp(0.0, self.nu)
    }

    /// Mode-a fraction `gamma(theta)`; 0 for a vacuum source.
    pub fn gamma_of(&self, theta: f64) -> f64 {
        if self.nu == 0.0 {
            return 0.0;
        }
        (self.mode_a_intensity(theta) / self.nu).clamp(0.0, 1.0)
    }
}

/// Composite midpoint rule over the relative phase.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseQuadrature {
    thetas: Vec<f64>,
}

impl PhaseQuadrature {
    pub fn midpoint(nodes: usize) -> Result<Self> {
        if nodes == 0 {
            return Err(Error::InvalidParameter {
                name: "theta_nodes",
                value: 0.0,
                reason: "must be at least 1",
            });
        }
        let h = 2.0 * PI / nodes as f64;
        let thetas = (0..nodes).map(|k| (k as f64 + 0.5) * h).collect();
        Ok(Self { thetas })
    }

    pub fn nodes(&self) -> usize {
        self.thetas.len()
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    /// Mean of `f` over the phase circle; summation order is fixed.
    pub fn average(&self, f: impl Fn(f64) -> f64) -> f64 {
        let sum: f64 = self.thetas.iter().map(|&th| f(th)).sum();
        sum / self.thetas.len() as f64
    }
}

impl Default for PhaseQuadrature {
    fn default() -> Self {
        Self::midpoint(DEFAULT_THETA_NODES).expect("default node count is positive")
    }
}

/// Click / no-click detector with per-gate dark count probability and efficiency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdDetector {
    epsilon: f64,
    eta_d: f64,
}

impl ThresholdDetector {
    pub fn new(epsilon: f64, eta_d: f64) -> Result<Self> {
        Ok(Self {
            epsilon: check_range("epsilon", epsilon, 0.0, 1.0)?,
            eta_d: check_range("eta_d", eta_d, 0.0, 1.0)?,
        })
    }

    /// Noiseless unit-efficiency detector.
    pub fn ideal() -> Self {
        Self {
            epsilon: 0.0,
            eta_d: 1.0,
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn eta_d(&self) -> f64 {
        self.eta_d
    }

    /// No-click probability for a coherent input of mean photon number `mean`.
    pub fn no_click_coherent(&self, mean: f64) -> f64 {
        (1.0 - self.epsilon) * (-self.eta_d * mean).exp()
    }

    /// Click probability for a coherent input, `1 - no_click_coherent`,
    /// evaluated without cancellation for weak inputs.
    pub fn click_coherent(&self, mean: f64) -> f64 {
        self.epsilon - (1.0 - self.epsilon) * (-self.eta_d * mean).exp_m1()
    }

    /// Click probability given exactly `m` incident photons.
    pub fn click_given(&self, m: usize) -> f64 {
        1.0 - (1.0 - self.epsilon) * (1.0 - self.eta_d).powi(m as i32)
    }
}

/// Outcome of Alice's monitoring detector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Branch {
    #[serde(rename = "c")]
    Click,
    #[serde(rename = "nc")]
    NoClick,
}

impl Branch {
    pub const ALL: [Branch; 2] = [Branch::Click, Branch::NoClick];
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Click => "c",
            Branch::NoClick => "nc",
        })
    }
}

/// Truncation and quadrature settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Numerics {
    pub n_max: usize,
    pub theta_nodes: usize,
    pub tail_tolerance: f64,
}

impl Default for Numerics {
    fn default() -> Self {
        Self {
            n_max: DEFAULT_N_MAX,
            theta_nodes: DEFAULT_THETA_NODES,
            tail_tolerance: DEFAULT_TAIL_TOLERANCE,
        }
    }
}

impl Numerics {
    pub fn validate(&self) -> Result<()> {
        if self.n_max < 2 || self.n_max > MAX_PHOTON_NUMBER {
            return Err(Error::InvalidParameter {
                name: "n_max",
                value: self.n_max as f64,
                reason: "must lie in [2, 60]",
            });
        }
        if self.theta_nodes < 8 {
            return Err(Error::InvalidParameter {
                name: "theta_nodes",
                value: self.theta_nodes as f64,
                reason: "must be at least 8",
            });
        }
        if !(self.tail_tolerance > 0.0 && self.tail_tolerance < 1.0) {
            return Err(Error::InvalidParameter {
                name: "tail_tolerance",
                value: self.tail_tolerance,
                reason: "must lie in (0, 1)",
            });
        }
        Ok(())
    }
}

/// Truncated photon-number distributions on mode a, joint with Alice's outcome.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchDistributions {
    pub n_max: usize,
    pub p_click: Vec<f64>,
    pub p_noclick: Vec<f64>,
    pub p_total: Vec<f64>,
    pub tail_mass: f64,
}

impl BranchDistributions {
    pub fn branch(&self, branch: Branch) -> &[f64] {
        match branch {
            Branch::Click => &self.p_click,
            Branch::NoClick => &self.p_noclick,
        }
    }

    /// Probability of `branch` restricted to `n <= n_max`.
    pub fn branch_probability(&self, branch: Branch) -> f64 {
        self.branch(branch).iter().sum()
    }
}

/// `P_{n,m}`: joint probability of `n` photons in mode a and `m` in mode b,
/// using the default phase quadrature.
pub fn joint_probability(params: &PulsePairParams, n: usize, m: usize) -> Result<f64> {
    joint_probability_with(params, n, m, &PhaseQuadrature::default())
}

pub fn joint_probability_with(
    params: &PulsePairParams,
    n: usize,
    m: usize,
    quad: &PhaseQuadrature,
) -> Result<f64> {
    for k in [n, m] {
        if k > MAX_PHOTON_NUMBER {
            return Err(Error::PhotonNumberCap {
                requested: k,
                cap: MAX_PHOTON_NUMBER,
            });
        }
    }
    let kernel = params.kernel();
    let p = quad.average(|th| {
        poisson_pmf(kernel.mode_a_intensity(th), n) * poisson_pmf(kernel.mode_b_intensity(th), m)
    });
    Ok(p.clamp(0.0, 1.0))
}

/// Photon-number distributions of mode a conditioned jointly on Alice's
/// detector outcome. The mode-b photon sum is taken in closed form: a
/// coherent mode-b state of mean `x` fails to click with probability
/// `(1 - eps) exp(-eta_d x)`.
pub fn branch_distributions(
    params: &PulsePairParams,
    det: &ThresholdDetector,
    numerics: &Numerics,
) -> Result<BranchDistributions> {
    numerics.validate()?;
    let quad = PhaseQuadrature::midpoint(numerics.theta_nodes)?;
    let kernel = params.kernel();

    let nodes: Vec<(f64, f64, f64)> = quad
        .thetas()
        .iter()
        .map(|&th| {
            let b = kernel.mode_b_intensity(th);
            (
                kernel.mode_a_intensity(th),
                det.click_coherent(b),
                det.no_click_coherent(b),
            )
        })
        .collect();
    let weight = 1.0 / quad.nodes() as f64;

    let len = numerics.n_max + 1;
    let mut p_click = Vec::with_capacity(len);
    let mut p_noclick = Vec::with_capacity(len);
    let mut p_total = Vec::with_capacity(len);
    for n in 0..len {
        let (mut c, mut nc, mut tot) = (0.0, 0.0, 0.0);
        for &(a, click, no_click) in &nodes {
            let pn = poisson_pmf(a, n);
            c += pn * click;
            nc += pn * no_click;
            tot += pn;
        }
        p_click.push(c * weight);
        p_noclick.push(nc * weight);
        p_total.push(tot * weight);
    }

    let tail_mass = 1.0 - p_total.iter().sum::<f64>();
    if tail_mass > numerics.tail_tolerance {
        return Err(Error::TailMass {
            tail_mass,
            tolerance: numerics.tail_tolerance,
            n_max: numerics.n_max,
        });
    }
    Ok(BranchDistributions {
        n_max: numerics.n_max,
        p_click,
        p_noclick,
        p_total,
        tail_mass,
    })
}

fn moments(dist: &[f64]) -> Result<(f64, f64, f64)> {
    if dist.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::InvalidDistribution("entries must be finite and non-negative"));
    }
    let (mut mass, mut first, mut factorial2) = (0.0, 0.0, 0.0);
    for (n, &p) in dist.iter().enumerate() {
        let n = n as f64;
        mass += p;
        first += n * p;
        factorial2 += n * (n - 1.0) * p;
    }
    if mass <= 0.0 {
        return Err(Error::InvalidDistribution("zero total mass"));
    }
    if first <= 0.0 {
        return Err(Error::InvalidDistribution("zero mean photon number"));
    }
    Ok((mass, first, factorial2))
}

/// Second-order correlation `g2 = <n(n-1)> / <n>^2` of the renormalized
/// distribution.
pub fn g2(dist: &[f64]) -> Result<f64> {
    let (mass, first, factorial2) = moments(dist)?;
    Ok(factorial2 * mass / (first * first))
}

/// Mean photon number of the renormalized distribution.
pub fn branch_mean(dist: &[f64]) -> Result<f64> {
    let (mass, first, _) = moments(dist)?;
    Ok(first / mass)
}
