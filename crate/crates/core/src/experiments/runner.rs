//! Parallel closed-loop runs over many independent members.

use std::ops::ControlFlow;

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::ExperimentError;
use crate::esn::{Ensemble, EsnModel, MemberOutcome, ReservoirState};
use crate::mfe::Amplitudes;
use crate::rng::{stream, StreamKind};

/// Members per batched product. Results do not depend on it: every member is
/// bit-identical to a solo run.
const CHUNK: usize = 64;

pub(crate) type Member = (ReservoirState, Amplitudes, ChaCha8Rng);

/// Synchronizes one member per history. Member `i` draws its synchronization
/// noise from `units[i]` and its prediction noise from the same unit.
pub(crate) fn synchronized_members(
    model: &EsnModel,
    histories: &[&[Amplitudes]],
    seed: u64,
    units: &[u64],
) -> Result<Vec<Member>, ExperimentError> {
    histories
        .par_iter()
        .zip(units)
        .map(|(h, &unit)| {
            let mut sync = stream(seed, StreamKind::SyncNoise, unit);
            let r0 = model.synchronize(h, &mut sync)?;
            let a0 = *h.last().ok_or(ExperimentError::InvalidParameter("empty history".into()))?;
            Ok((r0, a0, stream(seed, StreamKind::PredictionNoise, unit)))
        })
        .collect()
}

/// Runs every member for up to `steps` steps; `observe(state, step, ã)` keeps
/// per-member bookkeeping and may retire the member.
pub(crate) fn run_members<S, F>(
    model: &EsnModel,
    members: Vec<Member>,
    states: Vec<S>,
    steps: usize,
    noise_enabled: bool,
    observe: F,
) -> Result<Vec<(MemberOutcome, S)>, ExperimentError>
where
    S: Send,
    F: Fn(&mut S, usize, &Amplitudes) -> ControlFlow<()> + Sync,
{
    assert_eq!(members.len(), states.len());
    let mut chunks: Vec<Vec<(Member, S)>> = Vec::new();
    for (i, pair) in members.into_iter().zip(states).enumerate() {
        if i % CHUNK == 0 {
            chunks.push(Vec::with_capacity(CHUNK));
        }
        chunks.last_mut().unwrap().push(pair);
    }
    let done = chunks
        .into_par_iter()
        .map(|chunk| {
            let (members, mut states): (Vec<Member>, Vec<S>) = chunk.into_iter().unzip();
            let outcomes = Ensemble::new(model, members, noise_enabled)?
                .run(steps, |id, step, a| observe(&mut states[id], step, a));
            Ok(outcomes.into_iter().zip(states).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;
    Ok(done.into_iter().flatten().collect())
}
