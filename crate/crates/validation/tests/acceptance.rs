//! Acceptance criteria, one PASS/FAIL line each. Exits non-zero if any fail.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use pdqkd::bounds::{key_rate, KeyRateParams, ObservedStatistics};
use pdqkd::io::{RecordWriter, RunConfig};
use pdqkd::optimize::{evaluate_rate, optimize, AxisRange, SearchSpace, SourcePoint};
use pdqkd::photon::{
    branch_distributions, g2, poisson_pmf, Branch, BranchDistributions, Numerics, PulsePairParams,
    ThresholdDetector,
};
use pdqkd::sim::{
    fit_channel, hom_coincidence_scan, monte_carlo_records, monte_carlo_run, predicted_statistics,
    ChannelModel, MonteCarloSummary,
};
use pdqkd_cli::commands;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

fn reference_source() -> (PulsePairParams, ThresholdDetector) {
    (
        PulsePairParams::new(0.64, 0.08, 0.5).unwrap(),
        ThresholdDetector::new(1.2e-5, 0.1).unwrap(),
    )
}

fn reference_stats() -> ObservedStatistics {
    ObservedStatistics::new(2.54e-6, 0.0613, 8.18e-5, 0.0555).unwrap()
}

fn reference_distributions() -> BranchDistributions {
    let (p, a) = reference_source();
    branch_distributions(&p, &a, &Numerics::default()).unwrap()
}

/// Bob's side solved from the reference statistics, with 9 dB inside Alice's
/// box and 10 km of 0.2 dB/km fiber.
fn reference_channel() -> ChannelModel {
    let template = ChannelModel::new(9.0, 10.0, 0.2, ThresholdDetector::ideal(), 0.0).unwrap();
    fit_channel(&reference_distributions(), &reference_stats(), &template).unwrap()
}

fn golden_rate() -> Outcome {
    let start = Instant::now();
    let d = reference_distributions();
    let r = key_rate(&d, &reference_stats(), &KeyRateParams::new(0.5, 1.22).unwrap()).unwrap();
    let elapsed = start.elapsed();
    let target = 1.50e-5;
    let dev = rel(r.r_total, target);
    let q1 = key_rate(&d, &reference_stats(), &KeyRateParams::new(1.0, 1.22).unwrap()).unwrap();
    Outcome::new(
        dev <= 0.10 && elapsed < Duration::from_secs(1),
        format!(
            "R = {:.4e} vs {target:.2e} ({:+.1}%), {elapsed:.2?}; with q = 1: R = {:.4e} ({:+.1}%)",
            r.r_total,
            100.0 * (r.r_total / target - 1.0),
            q1.r_total,
            100.0 * (q1.r_total / target - 1.0),
        ),
    )
}

fn g2_predictions() -> Outcome {
    let start = Instant::now();
    let d = reference_distributions();
    let gc = g2(d.branch(Branch::Click)).unwrap();
    let gnc = g2(d.branch(Branch::NoClick)).unwrap();
    let mut poisson_err: f64 = 0.0;
    for mu1 in [0.01, 0.1, 0.7, 1.9] {
        let p = PulsePairParams::new(mu1, 0.0, 0.5).unwrap();
        let single = branch_distributions(&p, &ThresholdDetector::new(1.2e-5, 0.1).unwrap(), &Numerics::default())
            .unwrap();
        for b in Branch::ALL {
            poisson_err = poisson_err.max((g2(single.branch(b)).unwrap() - 1.0).abs());
        }
    }
    let elapsed = start.elapsed();
    Outcome::new(
        (gc - 1.24).abs() <= 0.01
            && (gnc - 1.19).abs() <= 0.01
            && poisson_err <= 1e-9
            && elapsed < Duration::from_secs(1),
        format!("click {gc:.4}, no-click {gnc:.4}, Poisson |g2 - 1| <= {poisson_err:.1e}, {elapsed:.2?}"),
    )
}

fn hom_visibility() -> Outcome {
    let p = PulsePairParams::new(0.01, 0.01, 0.5).unwrap();
    let overlaps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
    let scan = hom_coincidence_scan(&p, &overlaps).unwrap();
    Outcome::new((scan.visibility - 0.5).abs() <= 0.01, format!("visibility {:.5}", scan.visibility))
}

fn distribution_correctness() -> Outcome {
    let alice = ThresholdDetector::new(1.2e-5, 0.1).unwrap();
    let numerics = Numerics::default();
    let doubled = Numerics { theta_nodes: 2 * numerics.theta_nodes, ..numerics };
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (mut norm_gap, mut identity, mut doubling): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..200 {
        let mu1: f64 = rng.random_range(0.0..1.5);
        let mu2 = rng.random_range(0.0..(2.0 - mu1).min(1.0));
        let t = rng.random_range(0.0..=1.0);
        let p = PulsePairParams::with_overlap(mu1, mu2, t, rng.random_range(0.0..=1.0)).unwrap();
        let d = branch_distributions(&p, &alice, &numerics).unwrap();
        let total = d.branch(Branch::Click).iter().chain(d.branch(Branch::NoClick)).sum::<f64>();
        norm_gap = norm_gap.max(1.0 - total);
        for ((c, nc), t) in d.branch(Branch::Click).iter().zip(d.branch(Branch::NoClick)).zip(&d.p_total) {
            identity = identity.max((c + nc - t).abs());
        }
        let dd = branch_distributions(&p, &alice, &doubled).unwrap();
        for b in Branch::ALL {
            for (x, y) in d.branch(b).iter().zip(dd.branch(b)) {
                doubling = doubling.max((x - y).abs());
            }
        }
    }

    // mu2 = 0: mode a carries Pois(mu1 t) and mode b Pois(mu1 (1 - t)),
    // independently.
    let mut reduction: f64 = 0.0;
    for (mu1, t) in [(0.64, 0.5), (0.1, 0.2), (1.3, 0.9), (0.02, 0.7)] {
        let d = branch_distributions(&PulsePairParams::new(mu1, 0.0, t).unwrap(), &alice, &numerics).unwrap();
        let p_click = 1.0 - (1.0 - alice.epsilon()) * (-alice.eta_d() * mu1 * (1.0 - t)).exp();
        for n in 0..d.p_total.len() {
            let a = poisson_pmf(mu1 * t, n);
            reduction = reduction
                .max((d.branch(Branch::Click)[n] - a * p_click).abs())
                .max((d.branch(Branch::NoClick)[n] - a * (1.0 - p_click)).abs());
        }
    }
    Outcome::new(
        norm_gap <= 1e-10 && identity <= 1e-12 && reduction <= 1e-10 && doubling <= 1e-12,
        format!(
            "1 - sum <= {norm_gap:.1e}, identity {identity:.1e}, Poisson reduction {reduction:.1e}, node doubling {doubling:.1e}"
        ),
    )
}

fn z_score(count: u64, trials: u64, p: f64) -> f64 {
    let n = trials as f64;
    (count as f64 - n * p) / (n * p * (1.0 - p)).sqrt()
}

/// Largest |z| over the sift fraction, branch share, gains, error gains and
/// the pooled photon-number histograms.
fn worst_z(s: &MonteCarloSummary, d: &BranchDistributions, ch: &ChannelModel) -> f64 {
    let pred = predicted_statistics(d, ch).unwrap().observed;
    let c = &s.counts;
    let mut z = vec![
        z_score(c.sifted, c.pulses, 0.5),
        z_score(c.alice_clicks, c.pulses, d.branch_probability(Branch::Click)),
        z_score(c.sifted_click, c.sifted, d.branch_probability(Branch::Click)),
    ];
    for b in Branch::ALL {
        z.push(z_score(c.detected(b), c.sifted, pred.gain(b)));
        z.push(z_score(c.errors(b), c.sifted, pred.error_gain(b)));
        let hist = s.histogram(b);
        let mut pooled = (0u64, 0.0);
        for (n, &p) in d.branch(b).iter().enumerate() {
            let count = hist.get(n).copied().unwrap_or(0);
            if c.pulses as f64 * p >= 25.0 {
                z.push(z_score(count, c.pulses, p));
            } else {
                pooled.0 += count;
                pooled.1 += p;
            }
        }
        if c.pulses as f64 * pooled.1 >= 25.0 {
            z.push(z_score(pooled.0, c.pulses, pooled.1));
        }
    }
    z.into_iter().map(f64::abs).fold(0.0, f64::max)
}

fn record_bytes(p: &PulsePairParams, a: &ThresholdDetector, ch: &ChannelModel, pulses: u64, seed: u64) -> Vec<u8> {
    let mut w = RecordWriter::new(Vec::new()).unwrap();
    monte_carlo_records(p, a, ch, pulses, seed, |r| w.write(r)).unwrap();
    w.finish().unwrap()
}

fn monte_carlo_equivalence() -> Outcome {
    let pulses = 10_000_000;
    let (p1, a1) = reference_source();
    let bob = |eps, eta| ThresholdDetector::new(eps, eta).unwrap();
    let sets = [
        (p1, a1, reference_channel()),
        (p1, a1, ChannelModel::new(9.0, 10.0, 0.2, bob(1e-6, 0.1), 0.02).unwrap()),
        (
            PulsePairParams::new(1.0, 0.2, 0.3).unwrap(),
            bob(1e-4, 0.3),
            ChannelModel::new(0.0, 30.0, 0.2, bob(1e-5, 0.5), 0.05).unwrap(),
        ),
        (
            PulsePairParams::new(0.3, 0.3, 0.5).unwrap(),
            bob(0.0, 0.9),
            ChannelModel::new(3.0, 0.0, 0.2, bob(0.0, 0.8), 0.01).unwrap(),
        ),
        (
            PulsePairParams::with_overlap(0.5, 0.05, 0.7, 0.6).unwrap(),
            bob(5e-5, 0.5),
            ChannelModel::new(1.0, 50.0, 0.2, bob(2e-5, 0.2), 0.03).unwrap(),
        ),
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for (i, (p, a, ch)) in sets.iter().enumerate() {
        let start = Instant::now();
        let s = monte_carlo_run(p, a, ch, pulses, 1000 + i as u64).unwrap();
        let elapsed = start.elapsed();
        let d = branch_distributions(p, a, &Numerics::default()).unwrap();
        let z = worst_z(&s, &d, ch);
        pass &= z <= 4.0 && elapsed < Duration::from_secs(60);
        parts.push(format!("set {}: max|z| {z:.2} in {:.1}s", i + 1, elapsed.as_secs_f64()));
    }
    let (p, a, ch) = &sets[0];
    let first = record_bytes(p, a, ch, 1_000_000, 11);
    let same = first == record_bytes(p, a, ch, 1_000_000, 11);
    let differs = first != record_bytes(p, a, ch, 1_000_000, 12);
    pass &= same && differs;
    parts.push(format!("records byte-identical per seed: {same}"));
    Outcome::new(pass, parts.join("; "))
}

fn bound_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8_675_309);
    let numerics = Numerics::default();
    let key = KeyRateParams::default();
    let le = |a: f64, b: f64| a <= b + 1e-9 * a.abs().max(b.abs()) + 1e-300;
    let (mut checked, mut violations, mut with_e1) = (0, 0, 0);
    while checked < 1000 {
        let bob = ThresholdDetector::new(rng.random_range(0.0..1e-4), rng.random_range(0.05..0.9)).unwrap();
        let ch = ChannelModel::new(
            rng.random_range(0.0..12.0),
            rng.random_range(0.0..150.0),
            0.2,
            bob,
            rng.random_range(0.0..0.1),
        )
        .unwrap();
        let alice = ThresholdDetector::new(rng.random_range(0.0..1e-4), rng.random_range(0.02..0.9)).unwrap();
        let p = PulsePairParams::with_overlap(
            rng.random_range(0.05..1.5),
            rng.random_range(0.005..0.6),
            rng.random_range(0.05..0.95),
            rng.random_range(0.3..=1.0),
        )
        .unwrap();
        let Ok(d) = branch_distributions(&p, &alice, &numerics) else {
            continue;
        };
        let pred = predicted_statistics(&d, &ch).unwrap();
        let truth = &pred.truth;
        let r = key_rate(&d, &pred.observed, &key).unwrap();
        checked += 1;
        violations += !le(r.y0_lower, truth.y0) as usize + !le(truth.y0, r.y0_upper) as usize;
        for (b, combined) in [(Branch::Click, r.combined_lower_c), (Branch::NoClick, r.combined_lower_nc)] {
            let pn = d.branch(b);
            violations += !le(combined, pn[1] * truth.y1 + pn[0] * truth.y0) as usize;
        }
        if let Some(e1u) = r.e1_upper {
            with_e1 += 1;
            violations += !le(truth.e1, e1u) as usize;
        }
    }
    Outcome::new(
        violations == 0,
        format!("{checked} channels ({with_e1} with an e1 bound), {violations} violations"),
    )
}

fn optimizer_sanity() -> Outcome {
    let (_, alice) = reference_source();
    let channel = reference_channel();
    let space = SearchSpace {
        mu1: AxisRange::new(0.1, 1.0, 5),
        mu2: AxisRange::new(0.01, 0.3, 5),
        t: AxisRange::new(0.3, 0.7, 5),
        overlap: 1.0,
        detector: alice,
        channel,
        key_params: KeyRateParams::default(),
        numerics: Numerics::default(),
        refinement_levels: 2,
        include: vec![SourcePoint::new(0.64, 0.08, 0.5)],
    };
    let result = optimize(&space).unwrap();
    let eval = |p: &SourcePoint| {
        evaluate_rate(p, space.overlap, &alice, &channel, &space.key_params, &space.numerics).unwrap_or(0.0)
    };
    let reference = eval(&SourcePoint::new(0.64, 0.08, 0.5));

    let last = result.refinement_history.last().unwrap();
    let mut axes = Vec::new();
    let mut cells = [0.0; 3];
    for (i, (full, fine)) in [(space.mu1, last.mu1), (space.mu2, last.mu2), (space.t, last.t)].iter().enumerate() {
        let n = ((full.hi - full.lo) / (fine.spacing() / 3.0)).round() as usize;
        cells[i] = (full.hi - full.lo) / n as f64;
        axes.push(AxisRange::new(full.lo, full.hi, n + 1).values());
    }
    let mut oracle = (SourcePoint::new(f64::NAN, f64::NAN, f64::NAN), f64::NEG_INFINITY);
    for &a in &axes[0] {
        for &b in &axes[1] {
            for &c in &axes[2] {
                let p = SourcePoint::new(a, b, c);
                let r = eval(&p);
                if r > oracle.1 {
                    oracle = (p, r);
                }
            }
        }
    }
    let found = result.best_point;
    let offsets = [
        (found.mu1 - oracle.0.mu1).abs() / cells[0],
        (found.mu2 - oracle.0.mu2).abs() / cells[1],
        (found.t - oracle.0.t).abs() / cells[2],
    ];
    let dominates = result.best_rate >= reference;
    let within = offsets.iter().all(|&o| o <= 1.0 + 1e-9);
    Outcome::new(
        dominates && within,
        format!(
            "best {:.4e} at ({:.4}, {:.4}, {:.4}) vs reference {reference:.4e}; oracle {:.4e} at ({:.4}, {:.4}, {:.4}); offset in oracle cells ({:.2}, {:.2}, {:.2})",
            result.best_rate, found.mu1, found.mu2, found.t,
            oracle.1, oracle.0.mu1, oracle.0.mu2, oracle.0.t,
            offsets[0], offsets[1], offsets[2],
        ),
    )
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/configs")
}

fn round_trip() -> Outcome {
    let cfg: RunConfig = commands::load_config(&configs_dir().join("fiber.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let records = dir.path().join("records.csv");
    let (pulses, seed) = (2_000_000, cfg.seed);
    commands::simulate(&cfg, pulses, seed, &records).unwrap();
    let ingested = commands::ingest(&records).unwrap().text;
    let stats_file = dir.path().join("stats.json");
    std::fs::write(&stats_file, &ingested).unwrap();
    let from_disk = commands::keyrate(&cfg, &commands::read_text(&stats_file).unwrap()).unwrap().text;

    let summary = monte_carlo_run(&cfg.source, &cfg.alice_detector, cfg.channel.as_ref().unwrap(), pulses, seed).unwrap();
    let doc = commands::keyrate_document(&cfg, &summary.observed().unwrap()).unwrap();
    let in_memory = pdqkd_cli::report::to_json(&doc);
    Outcome::new(
        from_disk == in_memory,
        format!("{} bytes, identical: {}, R = {:.4e}", in_memory.len(), from_disk == in_memory, doc.result.r_total),
    )
}

type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 8] = [
        ("golden key rate at the reference point", golden_rate),
        ("conditional g2 predictions", g2_predictions),
        ("HOM ideal visibility", hom_visibility),
        ("distribution correctness", distribution_correctness),
        ("Monte Carlo vs analytic", monte_carlo_equivalence),
        ("bound soundness sweep", bound_soundness),
        ("optimizer sanity", optimizer_sanity),
        ("simulate -> ingest -> keyrate round trip", round_trip),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let o = check();
        failed += !o.pass as usize;
        println!("{} [{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, i + 1, o.detail);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
