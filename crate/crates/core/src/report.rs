use isac_conic::{ConicSolution, KktResiduals, Status};
use serde::{Deserialize, Serialize};

use crate::metrics::{Metrics, Solution};

/// How the concave `−log2(affine)` objective terms reach the cone layer.
pub const LOG_HANDLING: &str =
    "native: each -log2(affine) term is an orthant entry of the interior-point barrier (no cutting planes)";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverDiag {
    pub status: Status,
    pub iterations: usize,
    pub newton_steps: usize,
    pub residuals: KktResiduals,
}

impl SolverDiag {
    pub fn of(sol: &ConicSolution) -> Self {
        SolverDiag {
            status: sol.status,
            iterations: sol.iterations,
            newton_steps: sol.newton_steps,
            residuals: sol.residuals,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: String,
    /// Optimal subproblem objective per SCA iteration (negated surrogate sum rate).
    pub objective_trace: Vec<f64>,
    /// Negated relaxed sum rate at each iterate.
    pub true_objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub metrics: Option<Metrics>,
    /// λ1/λ2 of every W_k, one row per iteration.
    pub rank_ratios: Vec<Vec<f64>>,
    /// How each final beamformer was obtained ("evd" or "randomized").
    pub extraction: Vec<String>,
    pub solver: Vec<SolverDiag>,
    /// Final bisection bracket of the sensing-only search, in dB.
    pub bracket_db: Option<[f64; 2]>,
    pub wall_time_s: f64,
    pub log_handling: String,
    pub notes: Vec<String>,
    #[serde(skip)]
    pub solution: Option<Solution>,
}

impl RunReport {
    pub fn new(scheme: &str) -> Self {
        RunReport { scheme: scheme.to_string(), log_handling: LOG_HANDLING.to_string(), ..Default::default() }
    }

    /// Largest consecutive increase of the objective trace (≤ 0 when monotone).
    pub fn max_increase(&self) -> f64 {
        self.objective_trace.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }
}
