//! Library side of the `cvbell` command: configuration, the subcommands
//! and the mapping from errors to exit codes.

pub mod commands;
pub mod config;

use cvbell_core::Error;
use serde::Serialize;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NO_PHOTONS: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

/// Exit status for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoPhotons { .. } | Error::BootstrapRejections { .. } => EXIT_NO_PHOTONS,
        _ => EXIT_INVALID,
    }
}

/// Machine-readable error report written to stderr.
#[derive(Debug, Serialize)]
pub struct ErrorReport {
    pub error: &'static str,
    pub message: String,
    pub exit_code: i32,
}

impl ErrorReport {
    pub fn new(err: &Error) -> Self {
        let kind = match err {
            Error::UnphysicalInput(_) => "unphysical_input",
            Error::IndexOutOfRange { .. } | Error::SameMode(_) | Error::DimensionMismatch { .. } => "invalid_circuit",
            Error::NotPositiveDefinite => "not_positive_definite",
            Error::NoPhotons { .. } => "no_photons",
            Error::NegativeCorrelation { .. } => "negative_correlation",
            Error::MomentExtraction(_) => "moment_extraction",
            Error::FitDegenerate(_) => "fit_degenerate",
            Error::MissingSetting(_) => "missing_setting",
            Error::ShortRecord { .. } => "short_record",
            Error::EmptyCalibration(_) => "empty_calibration",
            Error::DegenerateData(_) => "degenerate_data",
            Error::BootstrapRejections { .. } => "bootstrap_rejections",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Format(_) | Error::Csv(_) => "record_format",
            Error::Json(_) => "json",
            Error::Io(_) => "io",
        };
        Self {
            error: kind,
            message: err.to_string(),
            exit_code: exit_code(err),
        }
    }
}
