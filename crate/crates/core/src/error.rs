use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    // base dynamics
    #[error("invalid base system: {0}")]
    InvalidBase(String),
    #[error("invalid point: {0}")]
    InvalidPoint(String),
    #[error("points too far apart for local product structure: d = {distance}, radius = {radius}")]
    TooFarApart { distance: f64, radius: f64 },
    #[error("inadmissible splice at the bracket junction ({left} -> {right})")]
    InadmissibleSplice { left: u8, right: u8 },
    #[error("orbit segment does not return close enough: d(x, f^n x) = {distance} >= {radius}")]
    NotCloseEnough { distance: f64, radius: f64 },
    #[error("closing system M^n - I is singular")]
    SingularClosing,
    #[error("period {requested} exceeds the enumeration budget {budget}")]
    PeriodBudgetExceeded { requested: usize, budget: usize },
    #[error("subshift is not mixing")]
    NotMixing,
    #[error("no admissible connector of length {0}")]
    NoConnector(usize),

    // operator algebra
    #[error("dimension mismatch: {0} vs {1}")]
    DimMismatch(usize, usize),
    #[error("matrix is not invertible within tolerance (residual {0:e})")]
    NotInvertible(f64),
    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    // cocycle engine
    #[error("inadmissible window for locally constant table: {0}")]
    InadmissibleWord(String),
    #[error("invalid cocycle spec: {0}")]
    InvalidSpec(String),
    #[error("Lyapunov-norm tail bound {bound:e} exceeds tolerance {tol:e}")]
    TailNotNegligible { bound: f64, tol: f64 },
    #[error("precondition violated: {0}")]
    Precondition(String),

    // periodic analysis
    #[error("closing failed: {0}")]
    ClosingFailed(String),
    #[error("closeness profile violated at j = {index}: {distance:e} > {bound:e}")]
    ProfileViolated { index: usize, distance: f64, bound: f64 },

    // holonomy
    #[error("points are not on a common local stable leaf (offset {0:e})")]
    NotOnStableLeaf(f64),
    #[error("points are not on a common local unstable leaf (offset {0:e})")]
    NotOnUnstableLeaf(f64),
    #[error("insufficient spread: {0}")]
    InsufficientSpread(String),

    // transfer solver
    #[error("orbit is not dense enough: coverage radius {coverage:e} > {grid_eps:e}")]
    OrbitNotDense { coverage: f64, grid_eps: f64 },
    #[error("periodic obstruction check failed at period {period} (deviation {deviation:e})")]
    ObstructionFailed { period: usize, deviation: f64 },

    // config / io
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
