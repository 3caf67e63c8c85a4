//! Lifetime statistics, ensemble early warning and laminarization
//! probability, each runnable against the flow model or a trained network.
//!
//! Every unit of work (initial condition, ensemble member, perturbation) owns
//! a random stream keyed by the master seed and its index, so results do not
//! depend on the number of worker threads.

mod detect;
mod earlywarn;
mod lifetime;
mod plam;
pub(crate) mod runner;
mod survival;

pub use detect::{detect_laminarization, Detection, DetectorParams, LaminarizationDetector};
pub use earlywarn::{
    early_warning_scan, ensemble_transition_probability, prefix_at, reference_probability, spread_times,
    EnsembleParams, ReferenceProbability, TransitionProbabilityEstimate, REFERENCE_UNIT_BASE,
};
pub use lifetime::{count_status, initial_condition, lifetime_experiment, uncensored, LifetimeParams, LifetimeSource};
pub use plam::{
    laminarization_probability_curve, log_spaced, perturbed_state, LaminarizationCurve, PlamParams, PlamSource,
};
pub use survival::{
    fit_exponential_mle, ks_statistic, relative_error, ExponentialFit, LifetimeSample, LifetimeStatus, Source,
    SurvivalCurve,
};

use thiserror::Error;

use crate::esn::EsnError;
use crate::mfe::MfeError;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("all {0} lifetime samples are censored")]
    AllCensored(usize),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("degenerate sample: {0}")]
    Degenerate(String),
    #[error("time {0} is outside the trajectory")]
    OutOfRange(f64),
    #[error("all {0} ensemble members diverged")]
    AllDiverged(usize),
    #[error(transparent)]
    Mfe(#[from] MfeError),
    #[error(transparent)]
    Esn(#[from] EsnError),
}

impl ExperimentError {
    /// Whether the failure is a statistical precondition rather than bad
    /// input or a numerical blow-up.
    pub fn is_statistical(&self) -> bool {
        matches!(
            self,
            ExperimentError::AllCensored(_)
                | ExperimentError::TooFewSamples { .. }
                | ExperimentError::Degenerate(_)
                | ExperimentError::AllDiverged(_)
        )
    }
}
