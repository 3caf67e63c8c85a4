//! Probability that a finite perturbation of the laminar flow decays.

use std::ops::ControlFlow;

use rayon::prelude::*;

use super::runner::{run_members, synchronized_members};
use super::ExperimentError;
use crate::esn::{EsnModel, MemberOutcome};
use crate::mfe::{random_state_with_energy, Amplitudes, MfeSystem, Stepper};
use crate::rng::{stream, StreamKind};

#[derive(Debug, Clone, Copy)]
pub enum PlamSource<'a> {
    Truth(&'a MfeSystem),
    /// The first `n_sync` states come from `system`, the rest from the model.
    Esn {
        model: &'a EsnModel,
        system: &'a MfeSystem,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlamParams {
    /// Perturbation energies, strictly increasing.
    pub energies: Vec<f64>,
    pub n_pert: usize,
    pub horizon: f64,
    /// A run counts as turbulent once its total energy drops below this.
    pub turb_threshold: f64,
    pub dt: f64,
    pub sample_every: f64,
    pub noise_enabled: bool,
}

impl Default for PlamParams {
    fn default() -> Self {
        PlamParams {
            energies: log_spaced(1e-4, 1.0, 20),
            n_pert: 50,
            horizon: 300.0,
            turb_threshold: 10.0,
            dt: 1e-3,
            sample_every: 1.0,
            noise_enabled: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaminarizationCurve {
    pub energies: Vec<f64>,
    /// Fraction of non-diverged runs that never turned turbulent.
    pub p_lam: Vec<f64>,
    pub n_pert: usize,
    pub n_turbulent: Vec<usize>,
    pub n_diverged: Vec<usize>,
}

/// `n` points from `lo` to `hi`, evenly spaced in the logarithm.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|k| match k {
                    0 => lo,
                    k if k == n - 1 => hi,
                    k => (a + (b - a) * k as f64 / (n - 1) as f64).exp(),
                })
                .collect()
        }
    }
}

/// Laminar flow plus a random perturbation of kinetic energy `energy`.
pub fn perturbed_state(
    system: &MfeSystem,
    energy: f64,
    seed: u64,
    unit: u64,
) -> Result<Amplitudes, ExperimentError> {
    let mut rng = stream(seed, StreamKind::Perturbation, unit);
    let da = random_state_with_energy(&mut rng, energy, system.geometry())?;
    Ok(Amplitudes::laminar().add(&da))
}

pub fn laminarization_probability_curve(
    source: PlamSource<'_>,
    params: &PlamParams,
    seed: u64,
) -> Result<LaminarizationCurve, ExperimentError> {
    if params.energies.is_empty() || params.n_pert == 0 {
        return Err(ExperimentError::InvalidParameter("empty energy grid or no perturbations".into()));
    }
    if params.energies.windows(2).any(|w| !(w[1] > w[0])) || !(params.energies[0] > 0.0) {
        return Err(ExperimentError::InvalidParameter("energies must be positive and strictly increasing".into()));
    }
    let samples = (params.horizon / params.sample_every + 1e-9).floor() as usize;
    let units: Vec<(usize, u64)> = (0..params.energies.len())
        .flat_map(|j| (0..params.n_pert).map(move |k| (j, (j * params.n_pert + k) as u64)))
        .collect();

    // per run: Some(turbulent) or None if diverged
    let verdicts: Vec<Option<bool>> = match source {
        PlamSource::Truth(sys) => units
            .par_iter()
            .map(|&(j, unit)| {
                let a0 = perturbed_state(sys, params.energies[j], seed, unit)?;
                let mut stepper = Stepper::new(sys, a0, params.dt, params.sample_every)?;
                if sys.kinetic_energy(&a0) < params.turb_threshold {
                    return Ok(Some(true));
                }
                for _ in 0..samples {
                    let a = stepper.advance()?;
                    if sys.kinetic_energy(&a) < params.turb_threshold {
                        return Ok(Some(true));
                    }
                }
                Ok(Some(false))
            })
            .collect::<Result<_, ExperimentError>>()?,
        PlamSource::Esn { model, system } => {
            esn_verdicts(model, system, params, seed, &units, samples)?
        }
    };

    let mut curve = LaminarizationCurve {
        energies: params.energies.clone(),
        p_lam: Vec::new(),
        n_pert: params.n_pert,
        n_turbulent: Vec::new(),
        n_diverged: Vec::new(),
    };
    for level in verdicts.chunks(params.n_pert) {
        let diverged = level.iter().filter(|v| v.is_none()).count();
        let turbulent = level.iter().filter(|v| **v == Some(true)).count();
        let valid = params.n_pert - diverged;
        curve.p_lam.push(if valid == 0 {
            f64::NAN
        } else {
            (valid - turbulent) as f64 / valid as f64
        });
        curve.n_turbulent.push(turbulent);
        curve.n_diverged.push(diverged);
    }
    Ok(curve)
}

fn esn_verdicts(
    model: &EsnModel,
    system: &MfeSystem,
    params: &PlamParams,
    seed: u64,
    units: &[(usize, u64)],
    samples: usize,
) -> Result<Vec<Option<bool>>, ExperimentError> {
    let n_sync = model.hyperparameters().n_sync.max(1);
    if n_sync > samples + 1 {
        return Err(ExperimentError::InvalidParameter("horizon shorter than the synchronization prefix".into()));
    }
    // the true prefix a(0) … a(n_sync − 1)
    let prefixes: Vec<Vec<Amplitudes>> = units
        .par_iter()
        .map(|&(j, unit)| {
            let a0 = perturbed_state(system, params.energies[j], seed, unit)?;
            let mut stepper = Stepper::new(system, a0, params.dt, params.sample_every)?;
            let mut states = vec![a0];
            while states.len() < n_sync {
                states.push(stepper.advance()?);
            }
            Ok(states)
        })
        .collect::<Result<_, ExperimentError>>()?;

    let turbulent_prefix: Vec<bool> = prefixes
        .iter()
        .map(|p| p.iter().any(|a| system.kinetic_energy(a) < params.turb_threshold))
        .collect();
    let histories: Vec<&[Amplitudes]> = prefixes.iter().map(Vec::as_slice).collect();
    let unit_ids: Vec<u64> = units.iter().map(|u| u.1).collect();
    let members = synchronized_members(model, &histories, seed, &unit_ids)?;

    let steps = samples + 1 - n_sync;
    let results = run_members(model, members, turbulent_prefix, steps, params.noise_enabled, |turb, _, a| {
        if *turb || system.kinetic_energy(a) < params.turb_threshold {
            *turb = true;
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    Ok(results
        .into_iter()
        .map(|(outcome, turb)| match outcome {
            // a run already flagged turbulent keeps its verdict
            MemberOutcome::Diverged { .. } if !turb => None,
            _ => Some(turb),
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn log_grid() {
        let e = log_spaced(1e-4, 1.0, 5);
        assert_eq!(e.len(), 5);
        assert_eq!(e[0], 1e-4);
        assert_eq!(e[4], 1.0);
        assert!((e[2] - 1e-2).abs() < 1e-15);
        assert!(e.windows(2).all(|w| w[1] > w[0]));
    }
}
