//! Workloads, job weights, global Lyapunov constants and empirical
//! stability and drift estimates.

mod estimate;
mod global;
mod weights;
mod workload;

use thiserror::Error;

use crate::lyapunov::LyapunovError;

pub use estimate::{
    drift_estimate, ls_slope, stability_estimate, DriftBin, DriftReport, ReplicationStability, StabilityReport,
    StabilityVerdict, DEFAULT_SLOPE_THRESHOLD, DRIFT_BINS, MIN_BIN_SAMPLES, MIN_DRIFT_INCREMENTS,
    MIN_STABILITY_SAMPLES,
};
pub use global::{eval_global, global_constants, tail_depth, GlobalConstants};
pub use weights::{job_weight, service_weight, sum_job_weights, total_weights, waiting_weight, JobPlace, WeightTable};
pub use workload::{counted_hat_levels, counted_workloads, immediate_workload, remaining_by_buffer, WorkloadView};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiagnosticsError {
    #[error("counter level {needed} needs route pre-draw depth {needed}, state has {depth}")]
    PredrawDepthInsufficient { needed: usize, depth: usize },
    #[error("slack {0} must be positive when routes are unbounded")]
    SlackNonPositive(f64),
    #[error("tail series does not converge (ratio bound {0})")]
    TailSeriesDiverges(f64),
    #[error("trajectory has {samples} samples, at least {needed} needed")]
    TrajectoryTooShort { samples: usize, needed: usize },
    #[error("{increments} increments, at least {needed} needed")]
    InsufficientSamples { increments: usize, needed: usize },
    #[error("trajectory rows lack the Lyapunov probe value")]
    MissingProbe,
    #[error(transparent)]
    Certificate(#[from] LyapunovError),
}

impl DiagnosticsError {
    pub fn code(&self) -> &'static str {
        match self {
            DiagnosticsError::PredrawDepthInsufficient { .. } => "PredrawDepthInsufficient",
            DiagnosticsError::SlackNonPositive(_) => "SlackNonPositive",
            DiagnosticsError::TailSeriesDiverges(_) => "TailSeriesDiverges",
            DiagnosticsError::TrajectoryTooShort { .. } => "TrajectoryTooShort",
            DiagnosticsError::InsufficientSamples { .. } => "InsufficientSamples",
            DiagnosticsError::MissingProbe => "MissingProbe",
            DiagnosticsError::Certificate(e) => e.code(),
        }
    }
}
