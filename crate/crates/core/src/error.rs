use isac_conic::Status;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, CoreError>;

#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("nodes {0} and {1} coincide")]
    CoincidentNodes(String, String),

    #[error("radar SINR constraint is infeasible from the initial point")]
    InfeasibleRadarConstraint,

    #[error("conic solver returned {status:?} at SCA iteration {iteration}")]
    SolverFailure { status: Status, iteration: usize },

    #[error("no randomized beamformer satisfies the radar constraint")]
    RandomizationFailure,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Conic(#[from] isac_conic::ConicError),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    /// Short tag used in the `status` column of sweep output.
    pub fn tag(&self) -> &'static str {
        match self {
            CoreError::InfeasibleRadarConstraint => "radar_infeasible",
            CoreError::SolverFailure { .. } | CoreError::Conic(_) => "solver_failure",
            CoreError::RandomizationFailure => "randomization_failure",
            CoreError::Numerical(_) => "numerical_failure",
            _ => "error",
        }
    }
}
