use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("indeterminate sign: divisor interval contains zero")]
    IndeterminateSign,
    #[error("no bracketed root: f({lo}) and f({hi}) have the same sign")]
    NoBracketedRoot { lo: f64, hi: f64 },
    #[error("digit indeterminate at step {step}")]
    DigitIndeterminate { step: usize },
    #[error("precision cap of {cap} bits reached")]
    PrecisionCap { cap: u64 },
    #[error("inconclusive at available precision")]
    Inconclusive,
    #[error("invalid truncation index {index}: digit is zero")]
    InvalidTruncationIndex { index: usize },
    #[error("truncation too short: no root greater than 1 at index {index}")]
    TruncationTooShort { index: usize },
    #[error("invalid base: {0}")]
    InvalidBase(String),
    #[error("point outside [0, 1)")]
    PointOutOfRange,
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("digit {digit} outside alphabet 0..={max}")]
    DigitOutOfAlphabet { digit: u8, max: u8 },
    #[error("inadmissible word")]
    Inadmissible,
    #[error("insufficient digit depth: need {needed}, have {available}")]
    InsufficientDepth { needed: usize, available: usize },
    #[error("periodic point (period {period})")]
    PeriodicPoint { period: usize },
    #[error("form violation at profile entry {k}")]
    FormViolation { k: usize },
    #[error("countable regime: r_hat = {r_hat} exceeds r/(1+r) = {bound}")]
    CountableRegime { r_hat: f64, bound: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("search budget exhausted; best margin {best_margin}")]
    SearchExhausted { best_margin: f64 },
    #[error("construction infeasible at this (N, M)")]
    ConstructionInfeasible,
    #[error("budget exceeded: {0}")]
    BudgetExceeded(String),
}

impl Error {
    /// Stable snake-case name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::IndeterminateSign => "indeterminate_sign",
            Error::NoBracketedRoot { .. } => "no_bracketed_root",
            Error::DigitIndeterminate { .. } => "digit_indeterminate",
            Error::PrecisionCap { .. } => "precision_cap",
            Error::Inconclusive => "inconclusive",
            Error::InvalidTruncationIndex { .. } => "invalid_truncation_index",
            Error::TruncationTooShort { .. } => "truncation_too_short",
            Error::InvalidBase(_) => "invalid_base",
            Error::PointOutOfRange => "point_out_of_range",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::DigitOutOfAlphabet { .. } => "digit_out_of_alphabet",
            Error::Inadmissible => "inadmissible",
            Error::InsufficientDepth { .. } => "insufficient_depth",
            Error::PeriodicPoint { .. } => "periodic_point",
            Error::FormViolation { .. } => "form_violation",
            Error::CountableRegime { .. } => "countable_regime",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::SearchExhausted { .. } => "search_exhausted",
            Error::ConstructionInfeasible => "construction_infeasible",
            Error::BudgetExceeded(_) => "budget_exceeded",
        }
    }
}
