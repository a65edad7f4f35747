use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("relation {relation}: expected arity {expected}, found {found}")]
    ArityMismatch {
        relation: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown relation {0}")]
    UnknownRelation(String),

    #[error("element {element} outside domain of size {n}")]
    ElementOutOfRange { element: u64, n: usize },

    #[error("element {element} has degree {degree}, bound is {bound}")]
    DegreeExceeded {
        element: usize,
        degree: usize,
        bound: usize,
    },

    #[error("{what} index {value} out of range (bound {bound})")]
    IndexOutOfRange { what: &'static str, value: u64, bound: u64 },

    #[error("neighbourhood is not of the requested type")]
    TypeMismatch,

    #[error("sphere formulas of one clause use different radii ({0} and {1})")]
    RadiusMismatch(usize, usize),

    #[error("expected {expected} centres, found {found}")]
    CentreCountMismatch { expected: usize, found: usize },

    #[error("query has Hanf sentences and is not local")]
    NotLocal,

    #[error("search space of {size} exceeds cap {cap}")]
    BudgetExceeded { size: u128, cap: u128 },

    #[error("no tester supplied for clause {0}")]
    MissingTester(usize),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, msg: msg.into() }
}
