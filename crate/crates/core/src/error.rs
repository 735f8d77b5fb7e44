use thiserror::Error;

use crate::instance::ValidationReport;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The instance document could not be decoded.
    #[error("parse error at `{path}` (line {line}, column {column}): {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsupported schema_version `{found}` (expected `{expected}`)")]
    SchemaVersion { found: String, expected: String },

    #[error("invalid instance: {0}")]
    Invalid(ValidationReport),

    #[error("item {item}: no menu price lies inside the fairness band")]
    EmptyAdmissibleMenu { item: usize },

    #[error("budget gamma = {gamma} is outside 0..={n}")]
    GammaOutOfRange { gamma: usize, n: usize },

    #[error("LP relaxation infeasible: capacity falls short of the minimum cost by {deficit}")]
    LpInfeasible { deficit: f64 },

    #[error("no admissible choice satisfies the robust margin constraint")]
    Infeasible,

    #[error("search space of {size} exceeds the oracle guard of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("prefix size {requested} exceeds the {available} available items")]
    PrefixOutOfRange { requested: usize, available: usize },

    #[error("choice has {found} entries but the instance has {expected} items")]
    ChoiceLength { found: usize, expected: usize },

    #[error("item {item}: menu index {index} out of range")]
    ChoiceIndex { item: usize, index: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
