use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("singular matrix: smallest singular value is zero")]
    SingularMatrix,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("position ({0:?}) left the domain beyond the clamp tolerance")]
    OutOfDomain(Vec<f64>),

    #[error("map inversion did not converge at node {node:?} (residual {residual:.3e})")]
    InversionFailed { node: Vec<usize>, residual: f64 },

    #[error("{solver} failed to reach tolerance {tol:.3e} in {iters} iterations (residual {residual:.3e})")]
    SolverDiverged {
        solver: &'static str,
        iters: usize,
        tol: f64,
        residual: f64,
    },

    #[error("optimizer hit the iteration limit ({0} iterations)")]
    MaxIterations(usize),

    #[error("map degenerated: cell determinant {det:.3e} fell below the guard {guard}")]
    MapDegenerate { det: f64, guard: f64 },

    #[error("CFL guard tripped: |v|_inf * tau = {lhs:.3e} > 4h = {rhs:.3e}; reduce tau")]
    CflExceeded { lhs: f64, rhs: f64 },

    #[error("velocity L^r norm exceeded the doubling guard at step {step}")]
    DoublingExceeded { step: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
