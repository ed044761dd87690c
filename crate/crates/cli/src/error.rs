//! CLI error taxonomy mapped onto exit codes:
//! 2 input/parse, 3 quadrature, 4 fit non-convergence, 5 data validation.

use cslbound::csl::CslError;
use cslbound::exclusion::ExclusionError;
use cslbound::io::IoError;
use cslbound::mass::GeometryError;
use cslbound::spectral::SpectralError;
use cslbound::thermal::ThermalError;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Quadrature(String),
    Fit(String),
    Validation(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Quadrature(_) => 3,
            CliError::Fit(_) => 4,
            CliError::Validation(_) => 5,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m)
            | CliError::Quadrature(m)
            | CliError::Fit(m)
            | CliError::Validation(m) => m,
        }
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<GeometryError> for CliError {
    fn from(e: GeometryError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<CslError> for CliError {
    fn from(e: CslError) -> Self {
        match e {
            CslError::NotConverged { .. } | CslError::SingularIntegrand { .. } => {
                CliError::Quadrature(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ExclusionError> for CliError {
    fn from(e: ExclusionError) -> Self {
        match e {
            ExclusionError::Csl(inner) => inner.into(),
            ExclusionError::NoInteriorMaximum { .. } => CliError::Validation(e.to_string()),
            ExclusionError::InvalidParameter(_) => CliError::Input(e.to_string()),
        }
    }
}

impl From<SpectralError> for CliError {
    fn from(e: SpectralError) -> Self {
        match e {
            SpectralError::NonConvergence { .. } | SpectralError::SingularSystem => {
                CliError::Fit(e.to_string())
            }
            SpectralError::TooFewPoints { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<ThermalError> for CliError {
    fn from(e: ThermalError) -> Self {
        match e {
            ThermalError::NonConvergence { .. } | ThermalError::SingularSystem => {
                CliError::Fit(e.to_string())
            }
            ThermalError::TooFewPoints { .. } | ThermalError::DegenerateX => {
                CliError::Validation(e.to_string())
            }
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}
