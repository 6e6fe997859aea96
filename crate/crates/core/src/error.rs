//! Error type shared by the whole crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-finite sample {value} at node (r = {r}, theta = {theta})")]
    NonFiniteSample { r: f64, theta: f64, value: f64 },

    #[error("grids do not match: {0}")]
    GridMismatch(&'static str),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error(
        "divergent tail: fitted exponent {exponent:.3} but the integrand requires decay \
         faster than {required:.3}"
    )]
    DivergentTail { exponent: f64, required: f64 },

    #[error("derivative order m = {m} not supported (m <= 2)")]
    UnsupportedOrder { m: usize },

    #[error(
        "orthogonality violation: moment {moment} = {value:.3e} exceeds {tolerance:.3e} \
         (relative to the source norm {norm:.3e})"
    )]
    OrthogonalityViolation {
        moment: &'static str,
        value: f64,
        tolerance: f64,
        norm: f64,
    },

    #[error("angular spectrum unresolved: relative content {content:.3e} in the top mode")]
    UnresolvedSpectrum { content: f64 },

    #[error("delta = {delta} outside the admissible band (-1, 0)")]
    DeltaOutOfRange { delta: f64 },

    #[error(
        "coefficient system too far from the identity (condition estimate {condition:.3e}); \
         the data is too large for the perturbative solve"
    )]
    EpsilonTooLarge { condition: f64 },

    #[error("a-priori bound violated: alpha = {alpha:.6e} below the floor {floor:.6e}")]
    AprioriViolation { alpha: f64, floor: f64 },

    #[error(
        "fixed-point iteration not contracting: ratios {history:?} at iteration {iteration}"
    )]
    NonContraction { iteration: usize, history: Vec<f64> },

    #[error("fixed point did not converge in {max_iter} iterations (last delta {delta:.3e})")]
    NoConvergence { max_iter: usize, delta: f64 },

    #[error("recenter shift ({c1:.3e}, {c2:.3e}) too large for the grid (limit {limit:.3e})")]
    RecenterOutOfRange { c1: f64, c2: f64, limit: f64 },

    #[error("degenerate ratio: r_c = {rc:.3e} > 0 with alpha = {alpha:.3e} below {floor:.3e}")]
    DegenerateRatio { rc: f64, alpha: f64, floor: f64 },

    #[error("matter data rejected: {0}")]
    InvalidMatter(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("radial solve failed for mode {mode}: {reason}")]
    SolveFailed { mode: i64, reason: &'static str },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
