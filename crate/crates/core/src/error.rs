use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid game specification: {0}")]
    InvalidSpec(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("coefficient `{coefficient}` evaluated to a non-finite value at {point}")]
    CoefficientEvaluation { coefficient: String, point: String },

    #[error("non-finite state on path {path} at step {step}")]
    NonFiniteState { path: usize, step: usize },

    #[error(
        "implicit step did not converge at step {step}, node {node} after {iterations} iterations; \
         refine the time partition so that L*dt < 1"
    )]
    FixedPointDivergence {
        step: usize,
        node: usize,
        iterations: usize,
    },

    #[error("mesh {mesh} is too coarse for Lipschitz constant {lipschitz}: need L*mesh < 1")]
    StepTooLarge { lipschitz: f64, mesh: f64 },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("Isaacs audit failed (max gap {max_gap:e}); equilibrium construction requires it to pass")]
    IsaacsViolated { max_gap: f64 },

    #[error(
        "no control pair satisfies both one-step inequalities at step {step}, node {node} \
         (best slacks {slack_1:e}, {slack_2:e}); refine the partition or grid"
    )]
    NoQualifyingPair {
        step: usize,
        node: usize,
        slack_1: f64,
        slack_2: f64,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
