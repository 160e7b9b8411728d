use thiserror::Error;

/// Errors raised by the numerical engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A parameter violated its validity domain.
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    /// Photon number beyond the hard truncation cap.
    #[error("photon number {requested} exceeds the hard cap of {cap}")]
    PhotonNumberCap { requested: usize, cap: usize },

    /// The truncated distribution leaves too much probability mass in the tail.
    #[error(
        "tail mass {tail_mass:.3e} exceeds tolerance {tolerance:.3e} at n_max = {n_max}; \
         raise n_max or lower the total intensity"
    )]
    TailMass {
        tail_mass: f64,
        tolerance: f64,
        n_max: usize,
    },

    /// A bound denominator fell below the degeneracy guard.
    #[error("degenerate denominator in {what} ({value:.3e}); the source configuration is ill-conditioned")]
    DegenerateDenominator { what: &'static str, value: f64 },

    /// Y_1^L collapsed to zero so no single-photon yield is established.
    #[error("no single-photon yield established; key rate is zero")]
    NoSinglePhotonYield,

    /// A probability array cannot support the requested moment.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(&'static str),

    /// Root finding or fitting could not bracket a solution.
    #[error("fit failed: {0}")]
    Fit(String),

    /// Malformed click-record or statistics input.
    #[error("record {index}: field `{field}`: {reason}")]
    Record {
        index: usize,
        field: &'static str,
        reason: String,
    },

    /// Malformed JSON input.
    #[error("parse error in {what}: {message}")]
    Parse { what: String, message: String },

    #[error("no records")]
    NoRecords,

    #[error("csv: {0}")]
    Csv(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Checks `value` lies in `[lo, hi]` (NaN rejected).
pub(crate) fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<f64> {
    if value.is_nan() || value < lo || value > hi {
        let reason = match (lo, hi) {
            (l, h) if l == 0.0 && h == 1.0 => "must lie in [0, 1]",
            (l, h) if l == 0.0 && h.is_infinite() => "must be finite and non-negative",
            (l, h) if l == 0.0 && h == 0.5 => "must lie in [0, 0.5]",
            (l, h) if l == 1.0 && h.is_infinite() => "must be at least 1",
            _ => "out of range",
        };
        return Err(Error::InvalidParameter {
            name,
            value,
            reason,
        });
    }
    Ok(value)
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<f64> {
    if !value.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            value,
            reason: "must be finite and non-negative",
        });
    }
    check_range(name, value, 0.0, f64::INFINITY)
}
