//! Command-line driver: scenario files, sweeps, tables and run manifests.

mod run;
mod scenario;

use thiserror::Error as ThisError;

pub use run::{
    diagram_report, epsilon_table, propagator_table, run_scenario, scenario_table, spdc_summary,
    spdc_table, squeeze_report, write_atomic, DiagramEntry, OutputRecord, RunReport, SqueezeReport,
    Table,
};
pub use scenario::{
    parse_scenario, CrystalSpec, Format, MaterialSpec, MediumSpec, Method, ObservationSpec,
    OutputSpec, PumpSpec, Quantity, RegionSpec, Scale, Scenario, Setup, SignalSpec, SweepAxis,
    SWEEPABLE,
};

use crate::Error;

/// Exit status for invalid input.
pub const EXIT_VALIDATION: i32 = 1;
/// Exit status for numerical or I/O failure.
pub const EXIT_FAILURE: i32 = 2;

#[derive(Debug, ThisError)]
pub enum CliError {
    #[error("scenario syntax error: {0}")]
    Syntax(String),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Numerical(#[from] Error),
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Syntax(_) | CliError::Invalid(_) => EXIT_VALIDATION,
            CliError::Numerical(e) if e.is_validation() => EXIT_VALIDATION,
            CliError::Numerical(_) | CliError::Io { .. } => EXIT_FAILURE,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Syntax(_) => "syntax",
            CliError::Invalid(_) => "validation",
            CliError::Numerical(e) if e.is_validation() => "validation",
            CliError::Numerical(_) => "numerical",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line JSON report for stderr.
    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": self.kind(), "message": self.to_string() }).to_string()
    }
}
