use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum QmError {
    #[error("dimension mismatch: {0}x{0} vs {1}x{1}")]
    DimensionMismatch(usize, usize),

    #[error("operator is not Hermitian: max deviation {0:.3e}")]
    NotHermitian(f64),

    #[error("trace deviates from 1 by {0:.3e}")]
    TraceNotUnit(f64),

    #[error("operator has eigenvalue {0:.3e} below the positivity floor")]
    NotPositive(f64),

    #[error("probabilities sum to {0}, expected 1")]
    PriorsNotNormalized(f64),

    #[error("prior probability {0} outside [0, 1]")]
    PriorOutOfRange(f64),

    #[error("effect operator norm {0} exceeds 1")]
    EffectNotContraction(f64),

    #[error("effect set is empty")]
    EmptyEffectSet,

    #[error("duplicate effect label (outcome {0}, multiplicity {1})")]
    DuplicateEffectLabel(String, usize),

    #[error("born probability has imaginary residue {0:.3e}")]
    ImaginaryResidue(f64),

    #[error("outcome has probability {0:.3e}, below the positivity floor: conditioning on an impossible result")]
    ZeroProbabilityOutcome(f64),

    #[error("effect set is biased: completeness defect {0:.3e} exceeds tolerance")]
    BiasedEffectSet(f64),

    #[error("input POVM is incomplete: defect {0:.3e}")]
    IncompletePovm(f64),

    #[error("measurement strength {0} outside [0, 1]")]
    InvalidStrength(f64),

    #[error("rate must be nonnegative, got {0}")]
    NegativeRate(f64),

    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("step guard tripped: dt * generator scale = {0:.3e} > 0.1")]
    StepGuard(f64),

    #[error("trace drifted by {0:.3e} during integration (limit 1e-7)")]
    TraceDrift(f64),

    #[error("non-finite entry encountered during integration")]
    NonFinite,

    #[error("predictive variant passed where a retrodictive one is required")]
    PredictiveVariant,

    #[error("degenerate measurement: Tr(pi) = {0:.3e} below 1e-12")]
    DegenerateMeasurement(f64),

    #[error("outcome grid too coarse: renormalization correction norm {0:.3e} > 0.5")]
    GridTooCoarse(f64),

    #[error("Fock truncation {0} too small (need at least {1})")]
    TruncationTooSmall(usize, usize),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}
