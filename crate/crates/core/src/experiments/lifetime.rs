//! Lifetimes of turbulence started from random initial conditions.

use std::ops::ControlFlow;

use rayon::prelude::*;

use super::detect::{DetectorParams, LaminarizationDetector};
use super::runner::{run_members, synchronized_members};
use super::survival::{LifetimeSample, LifetimeStatus, Source};
use super::ExperimentError;
use crate::esn::{EsnModel, MemberOutcome};
use crate::mfe::{random_state_with_energy, Amplitudes, MfeSystem, Stepper};
use crate::rng::{stream, StreamKind};

#[derive(Debug, Clone, Copy)]
pub enum LifetimeSource<'a> {
    Truth(&'a MfeSystem),
    /// `system` supplies the true synchronization prefix.
    Esn {
        model: &'a EsnModel,
        system: &'a MfeSystem,
    },
}

impl LifetimeSource<'_> {
    pub fn kind(&self) -> Source {
        match self {
            LifetimeSource::Truth(_) => Source::Truth,
            LifetimeSource::Esn { .. } => Source::Esn,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LifetimeParams {
    pub n_ic: usize,
    /// Kinetic energy of the random initial conditions.
    pub ic_energy: f64,
    /// Runs still turbulent at this time are censored.
    pub t_max: f64,
    pub dt: f64,
    pub sample_every: f64,
    pub detector: DetectorParams,
    pub noise_enabled: bool,
}

impl LifetimeParams {
    /// 200 initial conditions at `E = 0.3 Γx Γz`.
    pub fn standard(system: &MfeSystem) -> Self {
        LifetimeParams {
            n_ic: 200,
            ic_energy: 0.3 * system.geometry().energy_prefactor(),
            t_max: 60_000.0,
            dt: 1e-3,
            sample_every: 1.0,
            detector: DetectorParams::default(),
            noise_enabled: true,
        }
    }
}

/// The `i`-th initial condition of an experiment seeded with `seed`; truth and
/// network runs with the same seed start from the same states.
pub fn initial_condition(
    system: &MfeSystem,
    energy: f64,
    seed: u64,
    i: usize,
) -> Result<Amplitudes, ExperimentError> {
    let mut rng = stream(seed, StreamKind::InitialCondition, i as u64);
    Ok(random_state_with_energy(&mut rng, energy, system.geometry())?)
}

pub fn lifetime_experiment(
    source: LifetimeSource<'_>,
    params: &LifetimeParams,
    seed: u64,
) -> Result<Vec<LifetimeSample>, ExperimentError> {
    if params.n_ic == 0 || !(params.t_max > 0.0) {
        return Err(ExperimentError::InvalidParameter(
            "need at least one initial condition and a positive horizon".into(),
        ));
    }
    // validates the window against the sampling
    LaminarizationDetector::new(params.detector, params.sample_every)?;
    let max_samples = (params.t_max / params.sample_every + 1e-9).floor() as usize;
    let sample = |ic: usize, t: f64, status| LifetimeSample {
        ic,
        lifetime: t,
        status,
        source: source.kind(),
        seed,
    };

    match source {
        LifetimeSource::Truth(sys) => (0..params.n_ic)
            .into_par_iter()
            .map(|i| {
                let a0 = initial_condition(sys, params.ic_energy, seed, i)?;
                let mut det = LaminarizationDetector::new(params.detector, params.sample_every)?;
                let mut stepper = Stepper::new(sys, a0, params.dt, params.sample_every)?;
                det.push(sys.kinetic_energy(&a0));
                for _ in 0..max_samples {
                    let a = stepper.advance()?;
                    if let Some(k) = det.push(sys.kinetic_energy(&a)) {
                        return Ok(sample(i, k as f64 * params.sample_every, LifetimeStatus::Laminarized));
                    }
                }
                Ok(sample(i, params.t_max, LifetimeStatus::Censored))
            })
            .collect(),
        LifetimeSource::Esn { model, system } => {
            esn_lifetimes(model, system, params, seed, max_samples)
                .map(|v| v.into_iter().map(|(i, t, s)| sample(i, t, s)).collect())
        }
    }
}

fn esn_lifetimes(
    model: &EsnModel,
    system: &MfeSystem,
    params: &LifetimeParams,
    seed: u64,
    max_samples: usize,
) -> Result<Vec<(usize, f64, LifetimeStatus)>, ExperimentError> {
    let dt_model = model.hyperparameters().dt_model;
    if (dt_model - params.sample_every).abs() > 1e-9 * dt_model {
        return Err(ExperimentError::InvalidParameter(format!(
            "model step {dt_model} differs from the sampling interval {}",
            params.sample_every
        )));
    }
    let n_sync = model.hyperparameters().n_sync.max(1);
    if n_sync > max_samples {
        return Err(ExperimentError::InvalidParameter("horizon shorter than the synchronization prefix".into()));
    }

    // true prefix a(0) … a(n_sync − 1) from every initial condition
    let prefixes: Vec<Vec<Amplitudes>> = (0..params.n_ic)
        .into_par_iter()
        .map(|i| {
            let a0 = initial_condition(system, params.ic_energy, seed, i)?;
            let mut stepper = Stepper::new(system, a0, params.dt, params.sample_every)?;
            let mut states = vec![a0];
            while states.len() < n_sync {
                states.push(stepper.advance()?);
            }
            Ok(states)
        })
        .collect::<Result<_, ExperimentError>>()?;

    let mut detectors = Vec::with_capacity(params.n_ic);
    for p in &prefixes {
        let mut det = LaminarizationDetector::new(params.detector, params.sample_every)?;
        for a in p {
            det.push(system.kinetic_energy(a));
        }
        detectors.push(det);
    }
    let histories: Vec<&[Amplitudes]> = prefixes.iter().map(Vec::as_slice).collect();
    let units: Vec<u64> = (0..params.n_ic as u64).collect();
    let members = synchronized_members(model, &histories, seed, &units)?;

    let steps = max_samples + 1 - n_sync;
    let results = run_members(model, members, detectors, steps, params.noise_enabled, |det, _, a| {
        if det.push(system.kinetic_energy(a)).is_some() {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;

    Ok(results
        .into_iter()
        .enumerate()
        .map(|(i, (outcome, det))| match (outcome, det.hit()) {
            (MemberOutcome::Diverged { step }, _) => (i, (n_sync - 1 + step) as f64 * params.sample_every, LifetimeStatus::Diverged),
            (_, Some(k)) => (i, k as f64 * params.sample_every, LifetimeStatus::Laminarized),
            (_, None) => (i, params.t_max, LifetimeStatus::Censored),
        })
        .collect())
}

/// Laminarized lifetimes only, the input of the exponential fit.
pub fn uncensored(samples: &[LifetimeSample]) -> Vec<f64> {
    samples
        .iter()
        .filter(|s| s.status == LifetimeStatus::Laminarized)
        .map(|s| s.lifetime)
        .collect()
}

pub fn count_status(samples: &[LifetimeSample], status: LifetimeStatus) -> usize {
    samples.iter().filter(|s| s.status == status).count()
}
