use thiserror::Error;

/// Errors raised across the solver pipeline.
///
/// Variant names are part of the CLI contract: the binary maps them to
/// stable exit codes, so renaming one is a breaking change.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("operation requires the {required} family, got {actual}")]
    UnsupportedFamily {
        required: &'static str,
        actual: String,
    },

    #[error("Legendre search hit the momentum bound |p| = {radius}; increase the gradient radius")]
    GradientRadiusExceeded { radius: f64 },

    #[error("no finite gradient radius below {limit}: coercivity assumption violated")]
    CoercivityFailure { limit: f64 },

    #[error("unreached nodes after {steps} steps (max value {max:.3e}); search radius too small or cost blow-up")]
    Reachability { steps: usize, max: f64 },

    #[error("critical value increments not Cauchy: spread {spread:.3e} exceeds {limit:.3e} (estimate {alpha:.6})")]
    NoConvergence { spread: f64, limit: f64, alpha: f64 },

    #[error("barrier fails the fixed-point certificate: defect {defect:.3e} > {tol:.3e}; try a larger burn-in")]
    BarrierNotCritical { defect: f64, tol: f64 },

    #[error(
        "empty Aubry member set at threshold {threshold:.3e} (diagonal minimum {min_diag:.3e})"
    )]
    EmptyAubrySet { threshold: f64, min_diag: f64 },

    #[error("no common Aubry point across the measure path: intersection empty after time node {failed_at}")]
    AssumptionAViolated { failed_at: usize },

    #[error("drift magnitude {magnitude:.3e} exceeds {limit:.3e} at particle {particle}; barrier data looks corrupted")]
    DriftBlowup {
        magnitude: f64,
        limit: f64,
        particle: usize,
    },

    #[error("domination inequality violated by {violation:.3e} on sub-interval [{a}, {b}]")]
    DominationFailure { violation: f64, a: usize, b: usize },

    #[error("measure path leaves the admissible set: W1 ratio {ratio:.3e} exceeds {limit:.3e} between nodes {i} and {j}")]
    PathNotAdmissible {
        ratio: f64,
        limit: f64,
        i: usize,
        j: usize,
    },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serialize(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
