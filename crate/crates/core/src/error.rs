use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KamError {
    #[error("degenerate Cauchy margin")]
    DegenerateCauchyMargin,
    #[error("composition leaves analyticity domain")]
    LeavesDomain,
    #[error("incompatible centers")]
    IncompatibleCenters,
    #[error("resonant frequency at k = {0:?}")]
    ResonantFrequency(Vec<i32>),
    #[error("divergent Diophantine series")]
    DivergentSeries,
    #[error("perturbation not small (epsilon_0 = {0})")]
    PerturbationNotSmall(f64),
    #[error("fixed-point divergence: {0}")]
    FixedPointDivergence(String),
    #[error("no contraction certificate (varrho = {0})")]
    NoContraction(f64),
    #[error("target outside certified ball")]
    TargetOutsideBall,
    #[error("tube overlaps focal set")]
    TubeOverlapsFocalSet,
    #[error("candidate set exceeds oracle cap ({0} > {1})")]
    SizeCapExceeded(usize, usize),
    #[error("unsupported surface kind")]
    UnsupportedSurface,
    #[error("Hessian sampling failure: {0}")]
    HessianSampling(String),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, KamError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(KamError::Invalid(msg.into()))
}
