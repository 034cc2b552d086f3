use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("history segment spans {span}, shorter than the delay horizon {tau}")]
    SegmentTooShort { span: f64, tau: f64 },

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("no real zero of the characteristic function in [{lo}, {hi}]")]
    NoRealRoot { lo: f64, hi: f64 },

    #[error("characteristic determinant vanishes on the rectangle boundary after {retries} retries")]
    BoundaryZero { retries: usize },

    #[error("winding number did not settle (last estimate {estimate})")]
    WindingNotConverged { estimate: f64 },

    #[error("dominance rectangle contains {count} roots, expected exactly 1")]
    DominanceFailed { count: usize },

    #[error("root {lambda0} is not simple (local count {count})")]
    NotSimple { lambda0: f64, count: usize },

    #[error("Newton iteration diverged: {0}")]
    NewtonDiverged(String),

    #[error("strip around lambda0 holds {count} roots at epsilon = {epsilon}: speed below validated range")]
    StripCount { count: usize, epsilon: f64 },

    #[error("step {h} exceeds the delay {tau}; the explicit scheme would need unknown values")]
    StepTooLarge { h: f64, tau: f64 },

    #[error("solution blew up at t = {t} (norm {norm})")]
    BlowUp { t: f64, norm: f64 },

    #[error("no convergence to K by t = {t_max} (distance {distance})")]
    NoConvergenceToK { t_max: f64, distance: f64 },

    #[error("trajectory left the box [0, {upper}] at t = {t}")]
    LeftBox { t: f64, upper: f64 },

    #[error("decay fit rejected: {0}")]
    FitRejected(String),

    #[error("fixed-point iteration is not contracting (ratio {ratio} at iteration {iteration})")]
    NonContraction { ratio: f64, iteration: usize },

    #[error("fixed-point iteration stopped at k_max = {k_max} with change {change}")]
    IterationLimit { k_max: usize, change: f64 },

    #[error("left tail is stale: mismatch {mismatch} at the truncation point")]
    StaleTail { mismatch: f64 },

    #[error("profile residual {residual} exceeds the bound {bound}")]
    ResidualTooLarge { residual: f64, bound: f64 },

    #[error("time step {dt} violates the explicit stability bound {bound}")]
    Cfl { dt: f64, bound: f64 },

    #[error("no crossing of level {level} at t = {t}")]
    NoCrossing { level: f64, t: f64 },

    #[error("profile window not covered: {0}")]
    WindowNotCovered(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
