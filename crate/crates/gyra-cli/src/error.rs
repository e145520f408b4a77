//! Error taxonomy and the stable exit-code mapping.
//!
//! Exit codes: 0 success, 2 configuration error (schema, ranges, file
//! handling, unusable flags), 3 numerical failure on a valid
//! configuration, 4 iteration-limit non-convergence.

use gyra_core::circuit::CircuitError;
use gyra_core::field::FieldError;
use gyra_core::gyrator::GyratorError;
use gyra_core::linalg::LinalgError;
use gyra_core::simulation::SimulateError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config schema error at {path}: {message}")]
    Schema { path: String, message: String },
    #[error("config range errors: {}", problems.join("; "))]
    Range { problems: Vec<String> },
    #[error("{message}")]
    Usage { message: String },
    #[error("{context}: {message}")]
    Io { context: String, message: String },
    #[error("{source}")]
    Numerical {
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error("{source}")]
    NonConvergence {
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema { .. }
            | CliError::Range { .. }
            | CliError::Usage { .. }
            | CliError::Io { .. } => 2,
            CliError::Numerical { .. } => 3,
            CliError::NonConvergence { .. } => 4,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            CliError::Schema { .. } => "schema",
            CliError::Range { .. } => "range",
            CliError::Usage { .. } => "usage",
            CliError::Io { .. } => "io",
            CliError::Numerical { .. } => "numerical",
            CliError::NonConvergence { .. } => "non-convergence",
        }
    }

    /// The machine-readable form printed to stderr on failure.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            code: &'a str,
            exit_code: i32,
            message: String,
            #[serde(skip_serializing_if = "Vec::is_empty")]
            details: Vec<String>,
        }
        #[derive(Serialize)]
        struct Doc<'a> {
            error: Body<'a>,
        }
        let details = match self {
            CliError::Range { problems } => problems.clone(),
            _ => Vec::new(),
        };
        let doc = Doc {
            error: Body {
                code: self.code(),
                exit_code: self.exit_code(),
                message: self.to_string(),
                details,
            },
        };
        serde_json::to_string_pretty(&doc).expect("error document serializes")
    }
}

/// Errors raised while turning config values into core-domain objects:
/// the configuration is at fault.
pub fn config_err(e: impl std::error::Error) -> CliError {
    CliError::Range {
        problems: vec![e.to_string()],
    }
}

pub fn io_err(context: &str, e: std::io::Error) -> CliError {
    CliError::Io {
        context: context.to_string(),
        message: e.to_string(),
    }
}

/// Errors raised by computations on an already validated model: split
/// iteration-limit failures (exit 4) from numerical failures (exit 3).
pub trait IntoRunError {
    fn into_run_error(self) -> CliError;
}

impl IntoRunError for GyratorError {
    fn into_run_error(self) -> CliError {
        CliError::Numerical {
            source: Box::new(self),
        }
    }
}

impl IntoRunError for LinalgError {
    fn into_run_error(self) -> CliError {
        CliError::Numerical {
            source: Box::new(self),
        }
    }
}

impl IntoRunError for SimulateError {
    fn into_run_error(self) -> CliError {
        CliError::Numerical {
            source: Box::new(self),
        }
    }
}

impl IntoRunError for FieldError {
    fn into_run_error(self) -> CliError {
        match self {
            FieldError::SolverSingular { .. } => CliError::NonConvergence {
                source: Box::new(self),
            },
            other => CliError::Numerical {
                source: Box::new(other),
            },
        }
    }
}

impl IntoRunError for CircuitError {
    fn into_run_error(self) -> CliError {
        match self {
            CircuitError::NoConvergence { .. } => CliError::NonConvergence {
                source: Box::new(self),
            },
            other => CliError::Numerical {
                source: Box::new(other),
            },
        }
    }
}

pub fn run_err<E: IntoRunError>(e: E) -> CliError {
    e.into_run_error()
}
