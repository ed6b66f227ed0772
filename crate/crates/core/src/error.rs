use std::io;

use crate::model::Violation;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration:{}", format_violations(.0))]
    InvalidConfig(Vec<Violation>),

    #[error("config line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Domain(String),

    #[error("utility for pair (node {node}, commodity {commodity}) failed the concavity check")]
    NonConcaveUtility { node: usize, commodity: usize },

    #[error("objective failed the concavity check on [{lo}, {hi}]")]
    NonConcave { lo: f64, hi: f64 },

    #[error("exact link selection refused: {edges} undirected edges exceeds the limit of {limit}")]
    EnumerationLimit { edges: usize, limit: usize },

    #[error("internal consistency fault at slot {slot}: {message}")]
    Fault { slot: u64, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(|v| format!("\n  {v}")).collect()
}
