use thiserror::Error;

/// Errors raised by the lacuna toolkit.
///
/// Every variant carries a stable kebab-case code (see [`Error::code`]) that
/// is also the first token of its `Display` output; the CLI and the JSON
/// artifacts report failures by that code.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("empty-configuration: a gap report needs at least one point")]
    EmptyConfiguration,

    #[error("precision-too-low: need {required} fractional bits, value carries {available}")]
    PrecisionTooLow { required: u64, available: u64 },

    #[error("not-lacunary: growth factor must exceed 1 ({0})")]
    NotLacunary(String),

    #[error("N-below-threshold: {0}")]
    NBelowThreshold(String),

    #[error("epsilon-domain: epsilon must lie in (0, 1/2), got {0}")]
    EpsilonDomain(String),

    #[error("delta-uncertifiable: domination fails at thinned index {index}")]
    DeltaUncertifiable { index: usize },

    #[error("infeasible-at-step: band intersection empty at step {step}")]
    InfeasibleAtStep { step: usize },

    #[error("interval-below-4-over-aN: search interval shorter than 4/a_N")]
    IntervalBelow4OverAN,

    #[error("not-super-lacunary: growth condition fails at index {index}")]
    NotSuperLacunary { index: usize },

    #[error("nesting-violated: next interval exceeds half the stability interval at k = {k}")]
    NestingViolated { k: u32 },

    #[error("N-out-of-range: {n} outside [{lo}, {hi}]")]
    NOutOfRange { n: u64, lo: u64, hi: u64 },

    #[error("measure-unsupported: {0}")]
    MeasureUnsupported(String),

    #[error("quadrature-underresolved: need at least {required} points, got {given}")]
    QuadratureUnderresolved { required: u64, given: u64 },

    #[error("fit-underdetermined: {0}")]
    FitUnderdetermined(String),

    #[error("cf-precision-exhausted: only {reliable} partial quotients are certified")]
    CfPrecisionExhausted { reliable: usize },

    #[error("insufficient-depth: need at least {required} convergents, have {available}")]
    InsufficientDepth { required: usize, available: usize },

    #[error("cz-pool-exhausted: built {achieved} of {requested} terms")]
    CzPoolExhausted { achieved: usize, requested: usize },

    #[error("beta-liouville-suspect: growth-rate estimate {0} exceeds the cap")]
    BetaLiouvilleSuspect(String),

    #[error("parameter-mismatch: {0}")]
    ParameterMismatch(String),

    #[error("invalid-input: {0}")]
    InvalidInput(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    /// Stable machine-readable code of the error.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyConfiguration => "empty-configuration",
            Error::PrecisionTooLow { .. } => "precision-too-low",
            Error::NotLacunary(_) => "not-lacunary",
            Error::NBelowThreshold(_) => "N-below-threshold",
            Error::EpsilonDomain(_) => "epsilon-domain",
            Error::DeltaUncertifiable { .. } => "delta-uncertifiable",
            Error::InfeasibleAtStep { .. } => "infeasible-at-step",
            Error::IntervalBelow4OverAN => "interval-below-4-over-aN",
            Error::NotSuperLacunary { .. } => "not-super-lacunary",
            Error::NestingViolated { .. } => "nesting-violated",
            Error::NOutOfRange { .. } => "N-out-of-range",
            Error::MeasureUnsupported(_) => "measure-unsupported",
            Error::QuadratureUnderresolved { .. } => "quadrature-underresolved",
            Error::FitUnderdetermined(_) => "fit-underdetermined",
            Error::CfPrecisionExhausted { .. } => "cf-precision-exhausted",
            Error::InsufficientDepth { .. } => "insufficient-depth",
            Error::CzPoolExhausted { .. } => "cz-pool-exhausted",
            Error::BetaLiouvilleSuspect(_) => "beta-liouville-suspect",
            Error::ParameterMismatch(_) => "parameter-mismatch",
            Error::InvalidInput(_) => "invalid-input",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
