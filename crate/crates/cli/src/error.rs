use std::fmt;

use stsdep::bitseq::BitSeqError;
use stsdep::depscope::DepError;
use stsdep::genrand::GenError;
use stsdep::minset::MinsetError;
use stsdep::pmatrix::MatrixError;
use stsdep::sts162::BatteryError;

/// Failure classes, each with its process exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<BitSeqError> for CliError {
    fn from(e: BitSeqError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<GenError> for CliError {
    fn from(e: GenError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<BatteryError> for CliError {
    fn from(e: BatteryError) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Data(e.to_string())
        }
    }
}

impl From<MatrixError> for CliError {
    fn from(e: MatrixError) -> Self {
        match &e {
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            MatrixError::Workers(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<DepError> for CliError {
    fn from(e: DepError) -> Self {
        match e {
            DepError::DegenerateSample(_) | DepError::Numerical(_) => CliError::Numerical(e.to_string()),
            DepError::TooFewBins(_) => CliError::Usage(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<MinsetError> for CliError {
    fn from(e: MinsetError) -> Self {
        match e {
            MinsetError::DegenerateSample(_) => CliError::Numerical(e.to_string()),
            MinsetError::InvalidStop(_) => CliError::Usage(e.to_string()),
            MinsetError::Active(inner) => inner.into(),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}
