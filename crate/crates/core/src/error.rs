use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {0:?} lies outside the chart domain")]
    PointOutsideDomain(Vec<f64>),
    #[error("metric is not positive definite at {0:?}")]
    MetricNotPositiveDefinite(Vec<f64>),
    #[error("operation needs derivatives to order {required}, chart provides {available}")]
    InsufficientDerivativeOrder { required: usize, available: usize },
    #[error("operation needs dimension at least {required}, got {actual}")]
    DimensionTooSmall { required: usize, actual: usize },
    #[error("zero vector cannot seed a frame")]
    ZeroVector,
    #[error("|∇f| = {grad_norm:e} is below the critical-point threshold")]
    CriticalPoint { grad_norm: f64 },
    #[error("soliton equation residual {residual:e} exceeds {threshold:e}")]
    NotASoliton { residual: f64, threshold: f64 },
    #[error("operation is defined for steady solitons only (rho = {0})")]
    NonzeroRho(f64),
    #[error("warping function must be positive (phi = {phi} at r = {r})")]
    NonpositivePhi { r: f64, phi: f64 },
    #[error("profile grid too coarse: {0}")]
    GridTooCoarse(String),
    #[error("fiber has no explicit chart")]
    MissingFiberChart,
    #[error("normalization must be positive, got {0}")]
    NormalizationNonpositive(f64),
    #[error("warping function reached {phi:e} at r = {r}")]
    PhiNonpositiveEncountered { r: f64, phi: f64 },
    #[error("integrator step failure at r = {r} (h = {h:e})")]
    StepFailure { r: f64, h: f64 },
    #[error("profile tail spans less than one decade ({0})")]
    TailTooShort(String),
    #[error("unknown catalog entry `{0}`")]
    UnknownName(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("chart declares no fibration")]
    NoFibration,
    #[error("level {0} is not a regular level of the declared fibration")]
    LevelNotRegular(f64),
    #[error("no sample points to evaluate")]
    EmptySampleSet,
    #[error("profile format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
