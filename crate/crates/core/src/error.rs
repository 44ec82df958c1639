use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("time {t} is at or beyond the scale-factor horizon {horizon}")]
    TimeBeyondHorizon { t: f64, horizon: f64 },
    #[error("negative time {0}")]
    NegativeTime(f64),
    #[error("invalid scale factor: {0}")]
    InvalidScaleFactor(String),
    #[error("invalid scale-factor table: {0}")]
    InvalidTable(String),
    #[error("no admissible t0: H exceeds 1/(n C_eps) and sigma <= -1")]
    NoAdmissibleT0,

    #[error("complex input passed to a real-only nonlinearity")]
    ComplexInputToRealNonlinearity,
    #[error("nonlinearity has non-real lambda; no real potential F is available")]
    NonRealLambdaNoPotential,
    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),
    #[error("eps = {eps} outside admissible range {range}")]
    EpsOutOfRange { eps: f64, range: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("profile width {width} must be below the half width {half_width}")]
    WidthTooLarge { width: f64, half_width: f64 },
    #[error("profile width {width} must exceed {min_width} (four cells)")]
    WidthTooSmall { width: f64, min_width: f64 },

    #[error("empty trace")]
    EmptyTrace,
    #[error("H diagnostic is undefined for m = 0")]
    MasslessHdiag,
    #[error("invalid physical parameters: {0}")]
    InvalidParams(String),

    #[error("amplitude calibration failed: {0}")]
    CalibrationFailed(String),

    #[error("time step {dt} violates the CFL limit {limit}")]
    CflViolation { dt: f64, limit: f64 },
    #[error("time step must be positive, got {0}")]
    InvalidTimeStep(f64),
    #[error("invalid run configuration: {0}")]
    InvalidRun(String),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { got: usize, need: usize },
    #[error("concavity problem not admissible: {0}")]
    NotAdmissible(String),
    #[error("solution stays positive up to T = {t_end}")]
    NoVanishBeforeT { t_end: f64 },

    #[error("parse error{}: {msg}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Parse { line: Option<usize>, msg: String },
    #[error("unknown key `{key}` at line {line}")]
    UnknownKey { line: usize, key: String },
    #[error("invariant violation in {module}: {msg}")]
    InvariantViolation { module: &'static str, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn parse(line: impl Into<Option<usize>>, msg: impl Into<String>) -> Self {
        Error::Parse {
            line: line.into(),
            msg: msg.into(),
        }
    }
}
