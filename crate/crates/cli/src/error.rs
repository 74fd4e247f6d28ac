use std::fmt;
use std::path::Path;

use lulc_core::calibrate::CalibrationError;
use lulc_core::classify::ClassifyError;
use lulc_core::geoformats::FormatError;
use lulc_core::wms::WmsError;
use lulc_core::zonal::ZonalError;

/// Failure of a command, carrying its process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or malformed input (exit 2).
    Parse(String),
    /// Inputs that parse but do not fit together (exit 3).
    Config(String),
    /// Calibration stopped without meeting the census (exit 4).
    NotConverged(String),
    /// WMS download failed (exit 5).
    Network(String),
    /// Writing an output failed (exit 1).
    Output(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Output(_) => 1,
            CliError::Parse(_) => 2,
            CliError::Config(_) => 3,
            CliError::NotConverged(_) => 4,
            CliError::Network(_) => 5,
        }
    }

    pub fn parse_in(path: &Path, e: impl fmt::Display) -> Self {
        CliError::Parse(format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Parse(m)
            | CliError::Config(m)
            | CliError::Network(m)
            | CliError::Output(m) => f.write_str(m),
            CliError::NotConverged(m) => write!(f, "calibration did not converge: {m}"),
        }
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<ZonalError> for CliError {
    fn from(e: ZonalError) -> Self {
        match e {
            ZonalError::Format(e) => CliError::Parse(e.to_string()),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<CalibrationError> for CliError {
    fn from(e: CalibrationError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<WmsError> for CliError {
    fn from(e: WmsError) -> Self {
        match e {
            WmsError::BadBbox | WmsError::BadSize(..) => CliError::Config(e.to_string()),
            WmsError::Io(_) => CliError::Output(e.to_string()),
            _ => CliError::Network(e.to_string()),
        }
    }
}

/// Hierarchy and band-set consistency problems surface as schema errors
/// after the documents themselves parsed.
pub fn config_error(e: FormatError) -> CliError {
    CliError::Config(e.to_string())
}
