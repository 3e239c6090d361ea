use std::fmt;

/// Failure categories raised while evaluating an expression.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    DivisionByZero,
    LogNonPositive,
    SqrtNegative,
    GammaPole,
    NonFinite,
}

impl fmt::Display for DomainKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainKind::DivisionByZero => "division by zero",
            DomainKind::LogNonPositive => "log of a nonpositive number",
            DomainKind::SqrtNegative => "sqrt of a negative number",
            DomainKind::GammaPole => "gamma at a pole",
            DomainKind::NonFinite => "non-finite result",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected {}", expected.join(" or "))]
    Syntax {
        offset: usize,
        expected: Vec<String>,
    },
    #[error("unknown identifier `{name}` at byte {offset}")]
    UnknownIdentifier { name: String, offset: usize },
    #[error("{kind} at t = {t}")]
    Domain { kind: DomainKind, t: f64 },
    #[error("quadrature failed on ({lo}, {hi}]: {reason}")]
    QuadratureFailure { lo: f64, hi: f64, reason: String },
    #[error("invalid law: {0}")]
    InvalidLaw(String),
    #[error("invalid drift: {0}")]
    InvalidDrift(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("probe failure: {0}")]
    ProbeFailure(String),
    #[error("left limit of F at the right endpoint is inconclusive")]
    InconclusiveLimit,
    #[error("contradiction: {0}")]
    Contradiction(String),
    #[error("F is constant on [{t_star}, t_G)")]
    EventuallyConstant { t_star: f64 },
    #[error("the law has an atom at its right endpoint")]
    UnsupportedAtomAtEndpoint,
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),
    #[error("budget exhausted: achieved {achieved}")]
    BudgetExhausted { achieved: f64 },
    #[error("unknown gallery entry `{0}`")]
    UnknownEntry(String),
    #[error("spec file: {0}")]
    SpecFile(String),
}

impl Error {
    /// Errors that mark the edge of what double precision can resolve, as
    /// opposed to genuine input mistakes.
    pub fn is_numerical_horizon(&self) -> bool {
        matches!(
            self,
            Error::Domain {
                kind: DomainKind::NonFinite,
                ..
            } | Error::QuadratureFailure { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
