use std::fmt;

use thiserror::Error;

/// A single invalid or missing configuration entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigIssue {
    pub key: String,
    pub message: String,
}

impl ConfigIssue {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.key, self.message)
    }
}

fn join_issues(issues: &[ConfigIssue]) -> String {
    issues.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {}", join_issues(.0))]
    Config(Vec<ConfigIssue>),

    #[error("{what} index {index} out of range (len {len})")]
    Index { what: &'static str, index: usize, len: usize },

    #[error("expansion point not strictly interior: {0}")]
    Expansion(String),

    #[error("start point not strictly feasible: {0}")]
    NotStrictlyFeasible(String),

    #[error("oracle dimension guard: {0} free variables exceeds 6")]
    OracleDimension(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
