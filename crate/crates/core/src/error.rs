use thiserror::Error;

/// Errors raised across the lab.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: value {value:e}, estimated error {error:e} after {subdivisions} subdivisions")]
    Quadrature {
        value: f64,
        error: f64,
        subdivisions: usize,
    },

    #[error("grid too coarse: {0} interior cell(s)")]
    GridTooCoarse(usize),

    #[error("hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("gamma infinite: ratio K(z/lambda)/K(z) unbounded near z = {0:e}")]
    GammaInfinite(f64),

    #[error("supercritical scaling exceeds dimension: sigma = {sigma} >= N = {dimension}")]
    Supercritical { sigma: f64, dimension: usize },

    #[error("solver did not converge: residual {residual:e} after {iterations} iterations")]
    NotConverged { residual: f64, iterations: usize },

    #[error("iteration stagnated: last step norm {0:e}")]
    Stagnation(f64),

    #[error("incompatible data: mean of f is {mean:e} (tolerance {tolerance:e})")]
    IncompatibleData { mean: f64, tolerance: f64 },

    #[error("no stabilization limit: kernel has compact support")]
    NoStabilization,

    #[error("partial decomposition: {have} of {need} eigenpairs")]
    PartialDecomposition { have: usize, need: usize },

    #[error("grid function mismatch: {0}")]
    Mismatch(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown check '{name}'; valid checks: {valid}")]
    UnknownCheck { name: String, valid: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("format error: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
