//! Click-record CSV streams and statistics files.
//!
//! Record columns are fixed:
//! `pulse_index,alice_click,alice_basis,alice_bit,bob_basis,detected,bob_bit`,
//! booleans written as `0`/`1` and an absent `bob_bit` as an empty field.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::bounds::ObservedStatistics;
use crate::error::{Error, Result};
use crate::sim::{ClickRecord, SiftCounts};

pub const RECORD_HEADER: [&str; 7] = [
    "pulse_index",
    "alice_click",
    "alice_basis",
    "alice_bit",
    "bob_basis",
    "detected",
    "bob_bit",
];

/// Buffered writer of click-record CSV.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W) -> Result<Self> {
        writeln!(out, "{}", RECORD_HEADER.join(","))?;
        Ok(Self { out })
    }

    pub fn write(&mut self, r: &ClickRecord) -> Result<()> {
        write!(
            self.out,
            "{},{},{},{},{},{},",
            r.pulse_index, r.alice_click as u8, r.alice_basis, r.alice_bit, r.bob_basis, r.detected as u8
        )?;
        match r.bob_bit {
            Some(b) => writeln!(self.out, "{b}")?,
            None => writeln!(self.out)?,
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.out.flush()?;
        Ok(self.out)
    }
}

fn parse_bit(index: usize, field: &'static str, raw: &str) -> Result<u8> {
    match raw {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::Record {
            index,
            field,
            reason: format!("expected 0 or 1, found {other:?}"),
        }),
    }
}

fn parse_record(index: usize, row: &csv::StringRecord) -> Result<ClickRecord> {
    if row.len() != RECORD_HEADER.len() {
        return Err(Error::Record {
            index,
            field: "row",
            reason: format!("expected {} fields, found {}", RECORD_HEADER.len(), row.len()),
        });
    }
    let pulse_index = row[0].parse::<u64>().map_err(|e| Error::Record {
        index,
        field: "pulse_index",
        reason: e.to_string(),
    })?;
    let detected = parse_bit(index, "detected", &row[5])? == 1;
    let bob_bit = match &row[6] {
        "" => None,
        raw => Some(parse_bit(index, "bob_bit", raw)?),
    };
    if bob_bit.is_some() != detected {
        return Err(Error::Record {
            index,
            field: "bob_bit",
            reason: if detected {
                "detected=1 but bob_bit is empty".into()
            } else {
                "bob_bit present but detected=0".into()
            },
        });
    }
    Ok(ClickRecord {
        pulse_index,
        alice_click: parse_bit(index, "alice_click", &row[1])? == 1,
        alice_basis: parse_bit(index, "alice_basis", &row[2])?,
        alice_bit: parse_bit(index, "alice_bit", &row[3])?,
        bob_basis: parse_bit(index, "bob_basis", &row[4])?,
        detected,
        bob_bit,
    })
}

/// Streams click records from CSV, calling `visit` for each.
/// Returns the number of records read.
pub fn read_records<R: Read>(input: R, mut visit: impl FnMut(&ClickRecord)) -> Result<u64> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(input);
    let header = reader.headers()?.clone();
    if header.iter().ne(RECORD_HEADER.iter().copied()) {
        return Err(Error::Record {
            index: 0,
            field: "header",
            reason: format!("expected `{}`", RECORD_HEADER.join(",")),
        });
    }
    let mut row = csv::StringRecord::new();
    let mut count = 0u64;
    while reader.read_record(&mut row)? {
        let rec = parse_record(count as usize, &row)?;
        visit(&rec);
        count += 1;
    }
    Ok(count)
}

/// Statistics rebuilt from a click-record file, tagged with its name.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IngestedStatistics {
    #[serde(flatten)]
    pub observed: ObservedStatistics,
    pub counts: SiftCounts,
    pub source_file: Option<String>,
    pub records: u64,
}

/// Sifts a record stream into gains and error rates, with the same tallies
/// the simulator uses.
pub fn ingest_records<R: Read>(input: R, source_file: Option<String>) -> Result<IngestedStatistics> {
    let mut counts = SiftCounts::default();
    let records = read_records(input, |r| counts.observe(r))?;
    if records == 0 {
        return Err(Error::NoRecords);
    }
    Ok(IngestedStatistics {
        observed: counts.observed()?,
        counts,
        source_file,
        records,
    })
}

#[derive(Debug, Deserialize)]
struct StatsSpec {
    q_c: f64,
    e_c: f64,
    q_nc: f64,
    e_nc: f64,
}

/// Reads observed statistics from a JSON document carrying at least
/// `q_c`, `e_c`, `q_nc` and `e_nc`; other members are ignored.
pub fn parse_statistics(text: &str) -> Result<ObservedStatistics> {
    let s: StatsSpec = serde_json::from_str(text).map_err(|e| Error::Parse {
        what: "statistics".into(),
        message: e.to_string(),
    })?;
    ObservedStatistics::new(s.q_c, s.e_c, s.q_nc, s.e_nc)
}
