use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tolerance {0}: expected 0 < eps < 1")]
    InvalidTolerance(String),

    #[error("dyadic exponent {0} exceeds the supported range")]
    ExponentOverflow(u128),

    #[error("cannot parse {what} from {input:?}")]
    Parse { what: &'static str, input: String },

    #[error("0 is not an ordinary point: leading coefficient a_r vanishes at z = 0")]
    NotOrdinary,

    #[error("invalid differential operator: {0}")]
    InvalidOperator(String),

    #[error("expected {expected} initial values, got {got}")]
    Arity { expected: usize, got: usize },

    #[error("singular recurrence: b_0({n}) = 0")]
    SingularRecurrence { n: u64 },

    #[error("evaluation point {point} is not certified inside the disk of convergence (radius lower bound {bound}); pass --assume-in-disk to override")]
    OutsideDisk { point: String, bound: String },

    #[error("tolerance underflow: working exponent {exponent} exceeds cap {cap}; use a larger precision or fewer chunks")]
    ToleranceUnderflow { exponent: u64, cap: u64 },

    #[error("working precision exceeded: entry has {bits} bits, cap is {cap}")]
    WorkingPrecision { bits: u64, cap: u64 },

    #[error("truncation order certification failed: {0}")]
    CertificationFailed(String),

    #[error("norm transform unsupported for this instance: {0}")]
    UnsupportedInstance(String),

    #[error("classic and truncated results disagree at p = {prec} (difference bound {diff})")]
    CorrectnessRegression { prec: u64, diff: String },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("unknown catalog problem {0:?}")]
    UnknownProblem(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
