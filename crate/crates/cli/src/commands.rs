//! One function per subcommand.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use pdqkd::io::{ingest_records, parse_statistics, RecordWriter, RunConfig};
use pdqkd::optimize::{optimize, scan_rate_vs_distance, SourcePoint};
use pdqkd::sim::{monte_carlo_records, predicted_statistics};
use pdqkd::{branch_distributions, key_rate, ObservedStatistics};

use crate::report::{
    optimization_csv, scan_csv, to_json, DistributionReport, KeyRateDocument, ScanDocument,
    SimulationDocument,
};
use crate::{CliError, CliResult, ExitStatus, Format, Output};

pub fn read_text(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path.display().to_string(), e))
}

pub fn load_config(path: &Path) -> CliResult<RunConfig> {
    Ok(RunConfig::from_json(&read_text(path)?)?)
}

pub fn distribution(cfg: &RunConfig, format: Format) -> CliResult<Output> {
    let dists = branch_distributions(&cfg.source, &cfg.alice_detector, &cfg.numerics)?;
    let report = DistributionReport::new(cfg.source, cfg.alice_detector, cfg.numerics, dists);
    Ok(Output::ok(match format {
        Format::Json => to_json(&report),
        Format::Csv => report.to_csv(),
    }))
}

/// Key-rate document for already-parsed statistics.
pub fn keyrate_document(cfg: &RunConfig, observed: &ObservedStatistics) -> CliResult<KeyRateDocument> {
    let dists = branch_distributions(&cfg.source, &cfg.alice_detector, &cfg.numerics)?;
    let result = key_rate(&dists, observed, &cfg.key_params)?;
    Ok(KeyRateDocument {
        source: cfg.source,
        alice_detector: cfg.alice_detector,
        key_params: cfg.key_params,
        numerics: cfg.numerics,
        statistics: (*observed).into(),
        key_generated: result.r_total > 0.0,
        result,
    })
}

pub fn keyrate(cfg: &RunConfig, stats_text: &str) -> CliResult<Output> {
    let observed = parse_statistics(stats_text)?;
    let doc = keyrate_document(cfg, &observed)?;
    Ok(Output {
        text: to_json(&doc),
        status: if doc.key_generated {
            ExitStatus::Success
        } else {
            ExitStatus::NoKey
        },
    })
}

/// Path of the aggregated JSON written next to a records file.
pub fn summary_path(records: &Path) -> CliResult<PathBuf> {
    let summary = records.with_extension("json");
    if summary == records {
        return Err(CliError::Usage(format!(
            "records path {} must not end in .json; the summary is written there",
            records.display()
        )));
    }
    Ok(summary)
}

/// Runs the simulator, streaming records to `out` and writing the aggregated
/// summary beside it. Returns the summary document.
pub fn simulate(cfg: &RunConfig, pulses: u64, seed: u64, out: &Path) -> CliResult<Output> {
    let channel = *cfg.require_channel()?;
    let dists = branch_distributions(&cfg.source, &cfg.alice_detector, &cfg.numerics)?;
    let predicted = predicted_statistics(&dists, &channel)?.observed;
    let summary_file = summary_path(out)?;

    let io_err = |p: &Path| {
        let p = p.display().to_string();
        move |e| CliError::io(p, e)
    };
    let file = File::create(out).map_err(io_err(out))?;
    let mut writer = RecordWriter::new(BufWriter::new(file))?;
    let summary = monte_carlo_records(&cfg.source, &cfg.alice_detector, &channel, pulses, seed, |r| {
        writer.write(r)
    })?;
    writer.finish()?;

    let doc = SimulationDocument::new(
        &summary,
        pulses,
        Some(out.display().to_string()),
        predicted,
        cfg.source,
        cfg.alice_detector,
        channel,
    )?;
    let text = to_json(&doc);
    std::fs::write(&summary_file, &text).map_err(io_err(&summary_file))?;
    Ok(Output::ok(text))
}

pub fn ingest(records: &Path) -> CliResult<Output> {
    let name = records.display().to_string();
    let file = File::open(records).map_err(|e| CliError::io(name.clone(), e))?;
    let stats = ingest_records(BufReader::new(file), Some(name))?;
    Ok(Output::ok(to_json(&stats)))
}

pub fn optimize_cmd(cfg: &RunConfig, format: Format) -> CliResult<Output> {
    let result = optimize(&cfg.search_space()?)?;
    Ok(Output::ok(match format {
        Format::Json => to_json(&result),
        Format::Csv => optimization_csv(&result),
    }))
}

pub fn scan(cfg: &RunConfig, format: Format) -> CliResult<Output> {
    let channel = *cfg.require_channel()?;
    let lengths = cfg.lengths_km.as_deref().ok_or(pdqkd::Error::InvalidParameter {
        name: "lengths_km",
        value: f64::NAN,
        reason: "the scan command needs a lengths_km list",
    })?;
    let rows = scan_rate_vs_distance(
        &cfg.source,
        &cfg.alice_detector,
        &channel,
        lengths,
        &cfg.key_params,
        &cfg.numerics,
    )?;
    Ok(Output::ok(match format {
        Format::Json => to_json(&ScanDocument {
            point: SourcePoint::new(cfg.source.mu1(), cfg.source.mu2(), cfg.source.t()),
            channel,
            rows,
        }),
        Format::Csv => scan_csv(&rows),
    }))
}
