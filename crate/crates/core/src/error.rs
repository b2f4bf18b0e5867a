//! Error type shared by every module.
//!
//! Variants are grouped into three classes (validation, solver,
//! verification); the CLI maps each class to its own exit code.

use thiserror::Error;

/// Failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Solver,
    Verification,
}

/// Which sign implication of a solution failed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignRule {
    /// c must be positive on a compact-case solution.
    CPositive,
    /// The fibre Einstein constant must be positive.
    EpsPositive,
    /// p − 2 and a are both zero or both positive.
    AMatchesP,
    /// a = 0 forces p = 2 and r > 0.
    AZeroNeedsP2RPositive,
    /// r < 0 forces p > 2 and K < 0 everywhere.
    RNegativeNeedsP3KNegative,
}

impl std::fmt::Display for SignRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            SignRule::CPositive => "c > 0",
            SignRule::EpsPositive => "eps > 0",
            SignRule::AMatchesP => "p - 2 and a both zero or both positive",
            SignRule::AZeroNeedsP2RPositive => "a = 0 implies p = 2 and r > 0",
            SignRule::RNegativeNeedsP3KNegative => "r < 0 implies p > 2 and K < 0",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-finite value at node {node}")]
    NonFinite { node: usize },

    #[error("field has {got} values but the surface has {expected} nodes")]
    LengthMismatch { expected: usize, got: usize },

    #[error("degenerate triangle {index} (area {area:e})")]
    DegenerateTriangle { index: usize, area: f64 },

    #[error("mesh is not a closed orientable 2-manifold: {0}")]
    NotClosedManifold(String),

    #[error("mesh parse error at line {line}: {message}")]
    MeshParse { line: usize, message: String },

    #[error("field file error: {0}")]
    FieldFormat(String),

    #[error("parameter constraint violated: {0}")]
    Constraint(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("(p-1)K + eps changes sign or vanishes at {} node(s), first {first}", nodes.len())]
    OmegaSignChange { nodes: Vec<usize>, first: usize },

    #[error("sign rule violated: {rule}")]
    SignViolation { rule: SignRule },

    #[error("eigensolver did not converge after {iterations} iterations (residual {residual:e})")]
    EigenNonConvergence { iterations: usize, residual: f64 },

    #[error("Newton iteration failed: {0}")]
    NewtonFailure(String),

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("chart point outside the admissible domain: {0}")]
    ChartDomain(String),

    #[error("finite-difference step too small: {0}")]
    StepUnderflow(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::EigenNonConvergence { .. }
            | Error::NewtonFailure(_)
            | Error::Singular(_)
            | Error::StepUnderflow(_) => ErrorClass::Solver,
            Error::Verification(_) | Error::SignViolation { .. } => ErrorClass::Verification,
            _ => ErrorClass::Validation,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
