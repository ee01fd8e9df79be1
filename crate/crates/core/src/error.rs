//! Crate-wide error with a coarse class for exit statuses.

use thiserror::Error;

use crate::diagnostics::DiagnosticsError;
use crate::forecast::ForecastError;
use crate::montecarlo::MonteCarloError;
use crate::panel::PanelError;
use crate::regression::RegressionError;
use crate::report::ReportError;
use crate::targets::TargetError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Panel(#[from] PanelError),
    #[error(transparent)]
    Regression(#[from] RegressionError),
    #[error(transparent)]
    Diagnostics(#[from] DiagnosticsError),
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    MonteCarlo(#[from] MonteCarloError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Input,
    Numerical,
    NonConvergence,
}

impl ErrorClass {
    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Input => "input_error",
            ErrorClass::Numerical => "numerical_failure",
            ErrorClass::NonConvergence => "non_convergence",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Input => 2,
            ErrorClass::Numerical => 3,
            ErrorClass::NonConvergence => 4,
        }
    }
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    pub fn class(&self) -> ErrorClass {
        use ErrorClass::*;
        match self {
            Error::Panel(e) => match e {
                PanelError::DivisionByZeroGross { .. } | PanelError::NonStationaryDgp { .. } => Numerical,
                _ => Input,
            },
            Error::Regression(e) => match e {
                RegressionError::RankDeficientDesign { .. }
                | RegressionError::SingularSigma { .. }
                | RegressionError::NonStationaryArEstimate { .. } => Numerical,
                RegressionError::NoConvergence { .. } => NonConvergence,
                _ => Input,
            },
            Error::Diagnostics(e) => match e {
                DiagnosticsError::PerfectCollinearity { .. } | DiagnosticsError::ZeroResiduals => Numerical,
                _ => Input,
            },
            Error::Forecast(e) => match e {
                ForecastError::DegenerateAllCensored | ForecastError::ZeroLatentVariance => Numerical,
                ForecastError::NoConvergence { .. } => NonConvergence,
                _ => Input,
            },
            Error::MonteCarlo(_) | Error::Target(_) | Error::Report(_) | Error::Io { .. } | Error::Config(_) => Input,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.class().exit_code()
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classes_map_to_exit_codes() {
        let e: Error = RegressionError::NoConvergence { iterations: 50, last_change: 1.0 }.into();
        assert_eq!((e.class().name(), e.exit_code()), ("non_convergence", 4));
        let e: Error = RegressionError::SingularSigma { detail: "T <= J".into() }.into();
        assert_eq!(e.exit_code(), 3);
        let e: Error = TargetError::UnknownScenario("Z".into()).into();
        assert_eq!((e.class().name(), e.exit_code()), ("input_error", 2));
    }
}
