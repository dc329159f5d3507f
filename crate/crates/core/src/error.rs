use std::fmt;

use thiserror::Error;

use crate::transform::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("unsupported operation: {0}")]
    Unsupported(String),
    #[error("type error: {0}")]
    Type(String),
    #[error("model violation: {0}")]
    Model(Violation),
    #[error("contract error: {0}")]
    Contract(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("model failed validation: {0}")]
    Validation(ValidationReport),
}

/// Which restriction on optimization variables a model broke.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    NotDirectSample,
    Multiplicity,
    MeasureMismatch,
    UnknownMeasure,
}

impl Rule {
    pub fn id(self) -> &'static str {
        match self {
            Rule::NotDirectSample => "not-direct-sample",
            Rule::Multiplicity => "multiplicity",
            Rule::MeasureMismatch => "measure-mismatch",
            Rule::UnknownMeasure => "unknown-measure",
        }
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct Violation {
    pub rule: Rule,
    pub variable: String,
    pub message: String,
}

impl Violation {
    pub fn new(rule: Rule, variable: impl Into<String>, message: impl Into<String>) -> Self {
        Violation {
            rule,
            variable: variable.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}] {}: {}", self.rule, self.variable, self.message)
    }
}

/// Non-local exit from a running model body.
///
/// `Halt` is the early-termination signal raised by prior-mode handlers once
/// every optimization variable is bound; it is not an error.
#[derive(Debug, Clone, PartialEq)]
pub enum Signal {
    Halt,
    Fail(Error),
}

impl From<Error> for Signal {
    fn from(e: Error) -> Self {
        Signal::Fail(e)
    }
}

impl From<Violation> for Signal {
    fn from(v: Violation) -> Self {
        Signal::Fail(Error::Model(v))
    }
}
