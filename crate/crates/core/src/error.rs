use std::fmt;

/// Every failure the library can report.
///
/// `kind()` gives a stable snake_case tag used by the CLI.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    DivisionByZero,
    FieldMismatch { left: String, right: String },
    InvalidRadicand(String),
    Parse(String),
    UnknownPrime(String),
    DuplicatePrime(String),
    InvalidPrime { id: String, reason: String },
    SelfLoop(String),
    UnknownHandle(String),
    Disconnected,
    NotNegativeDefinite,
    NotNef(String),
    Singular,
    UnrecognizedLcShape(String),
    InvalidValuation(String),
    InvalidTable(String),
    MissingRf(String),
    InvalidSector(String),
    OutsideDomain(String),
    InsufficientTerms { need: usize, got: usize },
    Unresolved(String),
    NonConstantDeterminant(String),
    InvalidCycle(String),
    InvalidAlpha(String),
    SearchBoundExceeded(String),
    Io(String),
}

impl Error {
    pub fn kind(&self) -> &'static str {
        match self {
            Error::DivisionByZero => "division_by_zero",
            Error::FieldMismatch { .. } => "field_mismatch",
            Error::InvalidRadicand(_) => "invalid_radicand",
            Error::Parse(_) => "parse_error",
            Error::UnknownPrime(_) => "unknown_prime",
            Error::DuplicatePrime(_) => "duplicate_prime",
            Error::InvalidPrime { .. } => "invalid_prime",
            Error::SelfLoop(_) => "self_loop",
            Error::UnknownHandle(_) => "unknown_handle",
            Error::Disconnected => "disconnected",
            Error::NotNegativeDefinite => "not_negative_definite",
            Error::NotNef(_) => "not_nef",
            Error::Singular => "singular_matrix",
            Error::UnrecognizedLcShape(_) => "unrecognized_lc_shape",
            Error::InvalidValuation(_) => "invalid_valuation",
            Error::InvalidTable(_) => "invalid_table",
            Error::MissingRf(_) => "missing_rf",
            Error::InvalidSector(_) => "invalid_sector",
            Error::OutsideDomain(_) => "outside_domain",
            Error::InsufficientTerms { .. } => "insufficient_terms",
            Error::Unresolved(_) => "unresolved",
            Error::NonConstantDeterminant(_) => "non_constant_determinant",
            Error::InvalidCycle(_) => "invalid_cycle",
            Error::InvalidAlpha(_) => "invalid_alpha",
            Error::SearchBoundExceeded(_) => "search_bound_exceeded",
            Error::Io(_) => "io_error",
        }
    }

    /// Inconclusive outcomes, as opposed to invalid input.
    pub fn is_inconclusive(&self) -> bool {
        matches!(self, Error::Unresolved(_) | Error::SearchBoundExceeded(_) | Error::UnrecognizedLcShape(_))
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DivisionByZero => write!(f, "division by zero"),
            Error::FieldMismatch { left, right } => {
                write!(f, "cannot combine elements of Q(sqrt({left})) and Q(sqrt({right}))")
            }
            Error::InvalidRadicand(d) => write!(f, "radicand {d} must be square-free and >= 2"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::UnknownPrime(id) => write!(f, "unknown prime '{id}'"),
            Error::DuplicatePrime(id) => write!(f, "prime '{id}' declared twice"),
            Error::InvalidPrime { id, reason } => write!(f, "prime '{id}': {reason}"),
            Error::SelfLoop(id) => write!(f, "self-loop at prime '{id}'"),
            Error::UnknownHandle(h) => write!(f, "unknown edge or ray handle '{h}'"),
            Error::Disconnected => write!(f, "dual graph is not connected"),
            Error::NotNegativeDefinite => write!(f, "intersection matrix is not negative definite"),
            Error::NotNef(id) => write!(f, "Z(m) is not nef: row of prime '{id}' is positive"),
            Error::Singular => write!(f, "singular matrix"),
            Error::UnrecognizedLcShape(msg) => write!(f, "unrecognized lc shape: {msg}"),
            Error::InvalidValuation(msg) => write!(f, "invalid valuation: {msg}"),
            Error::InvalidTable(msg) => write!(f, "invalid transport table: {msg}"),
            Error::MissingRf(msg) => write!(f, "missing R_f data: {msg}"),
            Error::InvalidSector(msg) => write!(f, "invalid sector data: {msg}"),
            Error::OutsideDomain(msg) => write!(f, "valuation outside the map's domain: {msg}"),
            Error::InsufficientTerms { need, got } => {
                write!(f, "need at least {need} terms, got {got}")
            }
            Error::Unresolved(msg) => write!(f, "classification unresolved: {msg}"),
            Error::NonConstantDeterminant(msg) => {
                write!(f, "sector determinants are not constant: {msg}")
            }
            Error::InvalidCycle(msg) => write!(f, "invalid cusp cycle: {msg}"),
            Error::InvalidAlpha(msg) => write!(f, "invalid alpha: {msg}"),
            Error::SearchBoundExceeded(msg) => write!(f, "search bound exceeded: {msg}"),
            Error::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for Error {}

pub type Result<T> = std::result::Result<T, Error>;
