//! Pulse-level sampler of the full experiment.
//!
//! Pulses are split into fixed-size chunks. Chunk `c` draws from a ChaCha8
//! generator seeded with the run seed on stream `c`, so the sampled record
//! stream depends only on `(inputs, seed)` and never on how chunks are
//! scheduled across threads.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::Serialize;

use crate::bounds::ObservedStatistics;
use crate::error::{Error, Result};
use crate::photon::{Branch, InterferenceKernel, PulsePairParams, ThresholdDetector};
use crate::sim::channel::ChannelModel;

/// Pulses per random substream.
pub const CHUNK_PULSES: u64 = 1 << 16;

/// Photon numbers `0..PHOTON_HISTOGRAM_BINS` are histogrammed individually;
/// larger ones are counted in the overflow.
pub const PHOTON_HISTOGRAM_BINS: usize = 21;

/// Chunks sampled in parallel between two flushes of the record sink.
const RECORD_BATCH_CHUNKS: u64 = 32;

/// One emitted pulse as seen by the sifting bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ClickRecord {
    pub pulse_index: u64,
    pub alice_click: bool,
    pub alice_basis: u8,
    pub alice_bit: u8,
    pub bob_basis: u8,
    pub detected: bool,
    pub bob_bit: Option<u8>,
}

impl ClickRecord {
    pub fn branch(&self) -> Branch {
        if self.alice_click {
            Branch::Click
        } else {
            Branch::NoClick
        }
    }

    pub fn sifted(&self) -> bool {
        self.alice_basis == self.bob_basis
    }
}

/// Integer tallies behind the gains and error rates. Merging is associative
/// and commutative.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SiftCounts {
    pub pulses: u64,
    pub alice_clicks: u64,
    pub sifted: u64,
    pub sifted_click: u64,
    pub detected_c: u64,
    pub detected_nc: u64,
    pub errors_c: u64,
    pub errors_nc: u64,
}

impl SiftCounts {
    pub fn observe(&mut self, rec: &ClickRecord) {
        self.pulses += 1;
        self.alice_clicks += rec.alice_click as u64;
        if !rec.sifted() {
            return;
        }
        self.sifted += 1;
        self.sifted_click += rec.alice_click as u64;
        if let Some(bit) = rec.bob_bit {
            let error = (bit != rec.alice_bit) as u64;
            match rec.branch() {
                Branch::Click => {
                    self.detected_c += 1;
                    self.errors_c += error;
                }
                Branch::NoClick => {
                    self.detected_nc += 1;
                    self.errors_nc += error;
                }
            }
        }
    }

    pub fn merge(&mut self, other: &SiftCounts) {
        self.pulses += other.pulses;
        self.alice_clicks += other.alice_clicks;
        self.sifted += other.sifted;
        self.sifted_click += other.sifted_click;
        self.detected_c += other.detected_c;
        self.detected_nc += other.detected_nc;
        self.errors_c += other.errors_c;
        self.errors_nc += other.errors_nc;
    }

    pub fn detected(&self, branch: Branch) -> u64 {
        match branch {
            Branch::Click => self.detected_c,
            Branch::NoClick => self.detected_nc,
        }
    }

    pub fn errors(&self, branch: Branch) -> u64 {
        match branch {
            Branch::Click => self.errors_c,
            Branch::NoClick => self.errors_nc,
        }
    }

    /// Gains are per sifted pulse and joint with Alice's outcome; error
    /// rates are among sifted detections of that branch.
    pub fn observed(&self) -> Result<ObservedStatistics> {
        if self.sifted == 0 {
            return Err(Error::InvalidDistribution("no sifted pulses"));
        }
        let n = self.sifted as f64;
        let rate = |errors: u64, detected: u64| {
            if detected == 0 {
                0.0
            } else {
                errors as f64 / detected as f64
            }
        };
        ObservedStatistics::new(
            self.detected_c as f64 / n,
            rate(self.errors_c, self.detected_c),
            self.detected_nc as f64 / n,
            rate(self.errors_nc, self.detected_nc),
        )
    }
}

/// Aggregate of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MonteCarloSummary {
    pub seed: u64,
    pub counts: SiftCounts,
    /// Mode-a photon numbers, joint with Alice's outcome: `[click, no-click]`.
    pub photon_histogram: [Vec<u64>; 2],
    pub photon_overflow: [u64; 2],
}

impl MonteCarloSummary {
    fn empty(seed: u64) -> Self {
        Self {
            seed,
            counts: SiftCounts::default(),
            photon_histogram: [
                vec![0; PHOTON_HISTOGRAM_BINS],
                vec![0; PHOTON_HISTOGRAM_BINS],
            ],
            photon_overflow: [0; 2],
        }
    }

    fn record(&mut self, rec: &ClickRecord, photons: u64) {
        self.counts.observe(rec);
        let b = match rec.branch() {
            Branch::Click => 0,
            Branch::NoClick => 1,
        };
        match self.photon_histogram[b].get_mut(photons as usize) {
            Some(slot) => *slot += 1,
            None => self.photon_overflow[b] += 1,
        }
    }

    fn merge(&mut self, other: &MonteCarloSummary) {
        self.counts.merge(&other.counts);
        for b in 0..2 {
            for (a, o) in self.photon_histogram[b].iter_mut().zip(&other.photon_histogram[b]) {
                *a += o;
            }
            self.photon_overflow[b] += other.photon_overflow[b];
        }
    }

    pub fn observed(&self) -> Result<ObservedStatistics> {
        self.counts.observed()
    }

    pub fn histogram(&self, branch: Branch) -> &[u64] {
        match branch {
            Branch::Click => &self.photon_histogram[0],
            Branch::NoClick => &self.photon_histogram[1],
        }
    }
}

/// The simulated apparatus: source, Alice's monitor, channel and Bob.
#[derive(Debug, Clone, Copy)]
pub struct Experiment {
    kernel: InterferenceKernel,
    alice: ThresholdDetector,
    eta: f64,
    bob_dark: f64,
    misalignment: f64,
}

impl Experiment {
    pub fn new(params: &PulsePairParams, alice: &ThresholdDetector, ch: &ChannelModel) -> Self {
        Self {
            kernel: params.kernel(),
            alice: *alice,
            eta: ch.transmission(),
            bob_dark: ch.bob_detector().epsilon(),
            misalignment: ch.misalignment(),
        }
    }

    fn chunk_rng(seed: u64, chunk: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(chunk);
        rng
    }

    /// Samples one pulse; returns the record and the mode-a photon number.
    fn sample_pulse(&self, rng: &mut ChaCha8Rng, pulse_index: u64) -> (ClickRecord, u64) {
        let theta = rng.random::<f64>() * 2.0 * PI;
        let n = poisson(rng, self.kernel.mode_a_intensity(theta));
        let m = poisson(rng, self.kernel.mode_b_intensity(theta));
        let alice_click = rng.random::<f64>() < self.alice.click_given(m as usize);

        let alice_basis = rng.random::<bool>() as u8;
        let alice_bit = rng.random::<bool>() as u8;
        let bob_basis = rng.random::<bool>() as u8;

        let arrived = (0..n).filter(|_| rng.random::<f64>() < self.eta).count();
        // All arriving photons of a pulse leave Bob's interferometer through
        // the same port.
        let port = if arrived == 0 {
            None
        } else if alice_basis == bob_basis {
            let flip = rng.random::<f64>() < self.misalignment;
            Some(alice_bit ^ flip as u8)
        } else {
            Some(rng.random::<bool>() as u8)
        };
        let dark0 = rng.random::<f64>() < self.bob_dark;
        let dark1 = rng.random::<f64>() < self.bob_dark;
        let click0 = dark0 || port == Some(0);
        let click1 = dark1 || port == Some(1);
        let bob_bit = match (click0, click1) {
            (false, false) => None,
            (true, false) => Some(0),
            (false, true) => Some(1),
            (true, true) => Some(rng.random::<bool>() as u8),
        };

        let rec = ClickRecord {
            pulse_index,
            alice_click,
            alice_basis,
            alice_bit,
            bob_basis,
            detected: bob_bit.is_some(),
            bob_bit,
        };
        (rec, n)
    }

    fn run_chunk(
        &self,
        seed: u64,
        chunk: u64,
        n_pulses: u64,
        mut sink: impl FnMut(ClickRecord),
    ) -> MonteCarloSummary {
        let mut rng = Self::chunk_rng(seed, chunk);
        let mut summary = MonteCarloSummary::empty(seed);
        let start = chunk * CHUNK_PULSES;
        let end = (start + CHUNK_PULSES).min(n_pulses);
        for index in start..end {
            let (rec, photons) = self.sample_pulse(&mut rng, index);
            summary.record(&rec, photons);
            sink(rec);
        }
        summary
    }
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    let dist = Poisson::new(mean).expect("positive finite mean");
    dist.sample(rng) as u64
}

fn chunk_count(n_pulses: u64) -> u64 {
    n_pulses.div_ceil(CHUNK_PULSES)
}

/// Runs `n_pulses` pulses and returns the aggregated tallies.
pub fn monte_carlo_run(
    params: &PulsePairParams,
    alice: &ThresholdDetector,
    ch: &ChannelModel,
    n_pulses: u64,
    seed: u64,
) -> Result<MonteCarloSummary> {
    if n_pulses == 0 {
        return Err(Error::InvalidParameter {
            name: "n_pulses",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let exp = Experiment::new(params, alice, ch);
    let partials: Vec<MonteCarloSummary> = (0..chunk_count(n_pulses))
        .into_par_iter()
        .map(|c| exp.run_chunk(seed, c, n_pulses, |_| {}))
        .collect();
    let mut total = MonteCarloSummary::empty(seed);
    for p in &partials {
        total.merge(p);
    }
    Ok(total)
}

/// Like [`monte_carlo_run`], additionally handing every record to `sink`
/// in pulse order.
pub fn monte_carlo_records(
    params: &PulsePairParams,
    alice: &ThresholdDetector,
    ch: &ChannelModel,
    n_pulses: u64,
    seed: u64,
    mut sink: impl FnMut(&ClickRecord) -> Result<()>,
) -> Result<MonteCarloSummary> {
    if n_pulses == 0 {
        return Err(Error::InvalidParameter {
            name: "n_pulses",
            value: 0.0,
            reason: "must be at least 1",
        });
    }
    let exp = Experiment::new(params, alice, ch);
    let chunks = chunk_count(n_pulses);
    let mut total = MonteCarloSummary::empty(seed);
    let mut first = 0;
    while first < chunks {
        let last = (first + RECORD_BATCH_CHUNKS).min(chunks);
        let batch: Vec<(MonteCarloSummary, Vec<ClickRecord>)> = (first..last)
            .into_par_iter()
            .map(|c| {
                let mut recs = Vec::with_capacity(CHUNK_PULSES as usize);
                let summary = exp.run_chunk(seed, c, n_pulses, |r| recs.push(r));
                (summary, recs)
            })
            .collect();
        for (summary, recs) in &batch {
            total.merge(summary);
            for r in recs {
                sink(r)?;
            }
        }
        first = last;
    }
    Ok(total)
}
