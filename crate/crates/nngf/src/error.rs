use thiserror::Error;

/// Errors surfaced by kernel construction, regime analysis and simulation.
#[derive(Debug, Error)]
pub enum NngfError {
    #[error("degenerate activation: no Gaussian variance (all Hermite coefficients of order >= 1 vanish)")]
    DegenerateActivation,

    #[error("invalid kernel series: {0}")]
    InvalidSeries(String),

    #[error("numerical instability: kernel iterate left [-1,1] by {excess:.3e} at depth {depth}")]
    IterateOutOfRange { depth: usize, excess: f64 },

    #[error("quadrature under-resolved: doubling nodes changed the result by {delta:.3e}")]
    QuadratureUnresolved { delta: f64 },

    #[error("unsupported kernel: {0}")]
    UnsupportedKernel(String),

    #[error("kernel is sparse by derivative but the boundary expansion could not be fitted: {0}")]
    UnclassifiableSparse(String),

    #[error("excluded superattractive case: fixed point b=0 with kappa'(0)=0")]
    ExcludedSuperattractive,

    #[error("boundary-expansion assumption violated: residual fit R^2 = {r2:.4} < 0.99")]
    AssumptionViolation { r2: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("depth limit: renormalization factor leaves the floating-point range beyond L = {max_safe}")]
    DepthLimit { max_safe: usize },

    #[error("did not converge within the depth budget {budget}; last gap {gap:.3e}")]
    Budget { budget: usize, gap: f64 },

    #[error("node at the singular endpoint u = 1")]
    Singularity,

    #[error("spectral truncation too small: cumulative mass {mass:.12} at l_max = {l_max}")]
    LmaxTooSmall { l_max: usize, mass: f64 },

    #[error("spectrum depth overflow: 1 - C_0(L) = {gap:.3e} below resolution")]
    DepthOverflow { gap: f64 },

    #[error("quadrature degree {have} below exactness requirement {need}")]
    DegreeShortfall { have: usize, need: usize },

    #[error("Hermite rank undetermined up to q_max = {q_max}")]
    RankUndetermined { q_max: usize },

    #[error("chaos truncation too narrow: tail bound {tail:.3e} exceeds 10% of the partial sum {partial:.3e}")]
    WidenQmax { tail: f64, partial: f64 },

    #[error("empty chaos sum: truncation order {n} below the Hermite rank {rank}")]
    EmptySum { n: usize, rank: usize },

    #[error("spectral sequence is not admissible: partial sums exceeded {0:.3e}")]
    NotAdmissible(f64),

    #[error("Gram matrix not positive definite after jitter escalation (last jitter {jitter:.1e})")]
    NotPsd { jitter: f64 },

    #[error("unsupported grid: {0}")]
    UnsupportedGrid(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NngfError>;
