//! Command implementations behind the `pdqkd` binary.
//!
//! Every command returns its primary output as text so the binary, tests
//! and other callers render byte-identical documents.

pub mod commands;
pub mod report;

use pdqkd::Error;
use thiserror::Error as ThisError;

/// Process exit statuses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Success = 0,
    Failure = 1,
    Usage = 2,
    Validation = 3,
    Parse = 4,
    NoKey = 5,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error(transparent)]
    Engine(#[from] Error),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_status(&self) -> ExitStatus {
        match self {
            CliError::Engine(e) => match e {
                Error::InvalidParameter { .. }
                | Error::PhotonNumberCap { .. }
                | Error::TailMass { .. }
                | Error::DegenerateDenominator { .. }
                | Error::InvalidDistribution(_) => ExitStatus::Validation,
                Error::Parse { .. } | Error::Record { .. } | Error::NoRecords | Error::Csv(_) => {
                    ExitStatus::Parse
                }
                Error::NoSinglePhotonYield | Error::Fit(_) | Error::Io(_) => ExitStatus::Failure,
            },
            CliError::Io { .. } => ExitStatus::Failure,
            CliError::Usage(_) => ExitStatus::Usage,
        }
    }

    /// Extra guidance printed after the error message.
    pub fn hint(&self) -> Option<&'static str> {
        match self {
            CliError::Engine(Error::TailMass { .. }) => {
                Some("increase numerics.n_max (at most 60) or reduce mu1 + mu2")
            }
            CliError::Engine(Error::InvalidParameter { name: "n_max", .. }) => {
                Some("numerics.n_max must lie in [2, 60]")
            }
            CliError::Engine(Error::InvalidParameter { name: "theta_nodes", .. }) => {
                Some("numerics.theta_nodes must be at least 8; 256 is the default")
            }
            CliError::Engine(Error::DegenerateDenominator { .. }) => Some(
                "the two decoy distributions are proportional; use mu1, mu2 > 0, 0 < t < 1 and overlap > 0",
            ),
            _ => None,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Output format of table-producing commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Rendered command output.
#[derive(Debug, Clone, PartialEq)]
pub struct Output {
    pub text: String,
    pub status: ExitStatus,
}

impl Output {
    fn ok(text: String) -> Self {
        Self {
            text,
            status: ExitStatus::Success,
        }
    }
}
