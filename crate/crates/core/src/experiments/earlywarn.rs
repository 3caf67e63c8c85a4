//! Ensemble estimates of the probability that turbulence collapses soon.

use std::ops::ControlFlow;

use super::detect::{DetectorParams, LaminarizationDetector};
use super::runner::{run_members, synchronized_members};
use super::ExperimentError;
use crate::esn::{EsnModel, MemberOutcome};
use crate::mfe::{kinetic_energy, Amplitudes, DomainGeometry, Trajectory};

/// Members of one estimate use units `(estimate << MEMBER_BITS) | member`.
const MEMBER_BITS: u32 = 24;

/// Offset separating reference-probability units from scan units.
pub const REFERENCE_UNIT_BASE: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnsembleParams {
    pub n_ensemble: usize,
    /// Prediction length in time units.
    pub horizon: f64,
    pub detector: DetectorParams,
    pub noise_enabled: bool,
}

impl Default for EnsembleParams {
    fn default() -> Self {
        EnsembleParams {
            n_ensemble: 100,
            horizon: 2000.0,
            detector: DetectorParams::default(),
            noise_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransitionProbabilityEstimate {
    /// `n_laminarized / (n_ensemble − n_diverged)`.
    pub p: f64,
    pub n_ensemble: usize,
    pub n_laminarized: usize,
    pub n_diverged: usize,
    /// Time of the last prefix state.
    pub t_start: f64,
    pub horizon: f64,
}

/// Every member synchronizes on `prefix` with its own noise, predicts
/// `horizon` time units and is classified by the laminarization detector.
/// Diverged members are left out of the denominator.
pub fn ensemble_transition_probability(
    model: &EsnModel,
    geometry: &DomainGeometry,
    prefix: &[Amplitudes],
    t_start: f64,
    params: &EnsembleParams,
    seed: u64,
    unit: u64,
) -> Result<TransitionProbabilityEstimate, ExperimentError> {
    let n = params.n_ensemble;
    if n == 0 || n as u64 >= 1 << MEMBER_BITS || unit >= 1 << (48 - MEMBER_BITS) {
        return Err(ExperimentError::InvalidParameter(format!(
            "ensemble size {n} or unit {unit} out of range"
        )));
    }
    let dt = model.hyperparameters().dt_model;
    let steps = (params.horizon / dt + 1e-9).floor() as usize;
    let a0 = *prefix.last().ok_or(ExperimentError::InvalidParameter("empty prefix".into()))?;

    let histories = vec![prefix; n];
    let units: Vec<u64> = (0..n as u64).map(|k| (unit << MEMBER_BITS) | k).collect();
    let members = synchronized_members(model, &histories, seed, &units)?;

    let mut start = LaminarizationDetector::new(params.detector, dt)?;
    start.push(kinetic_energy(&a0, geometry));
    let detectors = vec![start; n];
    let results = run_members(model, members, detectors, steps, params.noise_enabled, |det, step, a| {
        if det.push(kinetic_energy(a, geometry)).is_some() || !det.still_possible(steps - step) {
            // decided either way
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;

    let mut n_laminarized = 0;
    let mut n_diverged = 0;
    for (outcome, det) in &results {
        if matches!(outcome, MemberOutcome::Diverged { .. }) {
            n_diverged += 1;
        } else if det.hit().is_some() {
            n_laminarized += 1;
        }
    }
    if n_diverged == n {
        return Err(ExperimentError::AllDiverged(n));
    }
    Ok(TransitionProbabilityEstimate {
        p: n_laminarized as f64 / (n - n_diverged) as f64,
        n_ensemble: n,
        n_laminarized,
        n_diverged,
        t_start,
        horizon: params.horizon,
    })
}

/// The `n_sync` states of `truth` ending at `t`.
pub fn prefix_at(truth: &Trajectory, t: f64, n_sync: usize) -> Result<&[Amplitudes], ExperimentError> {
    let i = truth.index_of(t).ok_or(ExperimentError::OutOfRange(t))?;
    if i + 1 < n_sync {
        return Err(ExperimentError::OutOfRange(t));
    }
    Ok(&truth.states[i + 1 - n_sync..=i])
}

/// One estimate per scan time, each synchronized on the true states ending
/// at that time.
pub fn early_warning_scan(
    model: &EsnModel,
    geometry: &DomainGeometry,
    truth: &Trajectory,
    times: &[f64],
    params: &EnsembleParams,
    seed: u64,
) -> Result<Vec<TransitionProbabilityEstimate>, ExperimentError> {
    let n_sync = model.hyperparameters().n_sync.max(1);
    let prefixes = times
        .iter()
        .map(|&t| prefix_at(truth, t, n_sync))
        .collect::<Result<Vec<_>, _>>()?;
    prefixes
        .iter()
        .zip(times)
        .enumerate()
        .map(|(j, (p, &t))| ensemble_transition_probability(model, geometry, p, t, params, seed, j as u64))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceProbability {
    pub p_ref: f64,
    pub estimates: Vec<TransitionProbabilityEstimate>,
}

/// Mean transition probability over typical turbulent states, each given by
/// its synchronization prefix and time.
pub fn reference_probability(
    model: &EsnModel,
    geometry: &DomainGeometry,
    test_states: &[(&[Amplitudes], f64)],
    params: &EnsembleParams,
    seed: u64,
) -> Result<ReferenceProbability, ExperimentError> {
    if test_states.is_empty() {
        return Err(ExperimentError::TooFewSamples { needed: 1, got: 0 });
    }
    let estimates = test_states
        .iter()
        .enumerate()
        .map(|(i, (p, t))| {
            ensemble_transition_probability(model, geometry, p, *t, params, seed, REFERENCE_UNIT_BASE + i as u64)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let p_ref = estimates.iter().map(|e| e.p).sum::<f64>() / estimates.len() as f64;
    Ok(ReferenceProbability { p_ref, estimates })
}

/// Evenly spread test times in `[start, end]` of a turbulent stretch, at
/// least `n_sync − 1` samples into the trajectory.
pub fn spread_times(truth: &Trajectory, start: f64, end: f64, n: usize) -> Vec<f64> {
    let lo = start.max(truth.time(9));
    let hi = end.min(truth.end_time());
    if n == 0 || hi < lo {
        return Vec::new();
    }
    if n == 1 {
        return vec![truth.time(truth.index_of(lo).unwrap_or(9))];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n)
        .map(|k| {
            let t = lo + step * k as f64;
            // snap onto the sampling grid
            truth.t0 + ((t - truth.t0) / truth.dt_sample).floor() * truth.dt_sample
        })
        .collect()
}
