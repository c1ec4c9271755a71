use thiserror::Error;

use crate::formula::{ClauseId, Var};

/// Broad classes of failure, used by frontends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// The input or configuration is invalid.
    Usage,
    /// The instance lies outside the regime where the counting pipeline
    /// has guarantees (unsatisfiable pieces, failed local-lemma searches,
    /// exceeded enumeration caps).
    Regime,
    /// An internal consistency check failed. Always a bug.
    Internal,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("DIMACS line {line}: {msg}")]
    MalformedDimacs { line: usize, msg: String },
    #[error("clause {clause} has width {found}, expected {expected}")]
    NonUniformWidth {
        clause: usize,
        expected: usize,
        found: usize,
    },
    #[error("variable {var} out of range 1..={n}")]
    VariableOutOfRange { var: i64, n: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("no valid marking after {attempts} resamplings (clause {clause} violates the per-clause thresholds)")]
    MarkingNotFound { attempts: usize, clause: ClauseId },
    #[error("bad component containing variable {first_var} has no satisfying assignment")]
    BadComponentUnsat { first_var: Var },
    #[error("component of {size} variables exceeds the cap of {cap}")]
    ComponentTooLarge { size: usize, cap: usize },
    #[error("could not satisfy the truncated good clauses (component containing clause {clause})")]
    LambdaStarNotFound { clause: ClauseId },
    #[error("pivot variable {0} is not marked")]
    PivotNotMarked(Var),
    #[error("pivot variable {0} is already assigned")]
    PivotAssigned(Var),
    #[error("coupling tree exceeded {cap} nodes ({leaves} leaves, {truncating} truncating so far)")]
    NodeCapExceeded {
        cap: usize,
        leaves: usize,
        truncating: usize,
    },
    #[error("{free} free variables exceed the enumeration cap of {cap}")]
    EnumerationCapExceeded { free: usize, cap: usize },
    #[error("node {node}: side {side} has no satisfying extension")]
    ZeroCount { node: usize, side: u8 },
    #[error("node {node}: side {side} admits no satisfying assignment")]
    EmptyAssignmentSet { node: usize, side: u8 },
    #[error("leaf {0} has no ratio attached")]
    MissingLeafRatio(usize),
    #[error("LP with {vars} variables and {rows} constraints exceeds the size cap")]
    SizeCapExceeded { vars: usize, rows: usize },
    #[error("bisection stalled: {0}")]
    BisectionStalled(String),
    #[error("formula restricted to the assignment is unsatisfiable")]
    Unsatisfiable,
    #[error("clause {0} survives the assignment but is not a bad clause")]
    NotFullyGoodSatisfied(ClauseId),

    #[error("internal invariant violated: {0}")]
    InvariantViolation(String),
    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::MalformedDimacs { .. }
            | Error::NonUniformWidth { .. }
            | Error::VariableOutOfRange { .. }
            | Error::InvalidConfig(_)
            | Error::PivotNotMarked(_)
            | Error::PivotAssigned(_) => ErrorClass::Usage,
            Error::InvariantViolation(_) | Error::MissingLeafRatio(_) => ErrorClass::Internal,
            Error::Stage { source, .. } => source.class(),
            _ => ErrorClass::Regime,
        }
    }

    /// Wraps the error with the pipeline stage it came from.
    pub fn at(self, stage: &'static str) -> Error {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage wrappers removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            e => e,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
