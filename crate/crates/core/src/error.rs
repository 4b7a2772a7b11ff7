use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular configuration: {0}")]
    SingularConfiguration(String),

    #[error("not an equilibrium: gradient residual {residual:e} exceeds {tolerance:e}")]
    NotEquilibrium { residual: f64, tolerance: f64 },

    #[error("Newton iteration did not converge after {iterations} iterations (last residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("Hessian is rank deficient (singular values span {min_singular:e}..{max_singular:e})")]
    RankDeficient { min_singular: f64, max_singular: f64 },

    #[error("no equilibrium found: {0}")]
    NotFound(String),

    #[error("eigenvalue solver failed: {0}")]
    Eigen(String),

    #[error("collision at t = {time}: interparticle distance {distance:e}")]
    Collision { time: f64, distance: f64 },

    #[error("integration failed at t = {time}: {reason}")]
    Integration { time: f64, reason: String },

    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),

    #[error("population control failed at generation {generation}: {population} walkers for target {target}")]
    Population {
        generation: usize,
        population: usize,
        target: usize,
    },

    #[error("empty walker ensemble")]
    EmptyEnsemble,

    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit status used by the command-line front end: 2 for usage
    /// problems, 1 for everything the physics can refuse.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidInput(_) => 2,
            _ => 1,
        }
    }
}
