//! Batched closed-loop runs.
//!
//! Independent members share the reservoir weights, so one sparse
//! matrix–matrix product replaces a matrix–vector product per member. Every
//! member keeps its own noise stream and is accumulated in exactly the same
//! order as [`EsnModel::run_autonomous`], so a member's trajectory is
//! bit-identical to the one it would produce alone.

use std::ops::ControlFlow;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{EsnError, EsnModel, ReservoirState, DIVERGENCE_LIMIT};
use crate::mfe::{Amplitudes, N_MODES};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MemberOutcome {
    /// Ran for all requested steps.
    Completed { steps: usize },
    /// The observer asked to stop after this step.
    Stopped { step: usize },
    /// Predicted amplitudes exceeded the divergence limit at this step.
    Diverged { step: usize },
}

pub struct Ensemble<'m> {
    model: &'m EsnModel,
    noise: f64,
    ids: Vec<usize>,
    rngs: Vec<ChaCha8Rng>,
    // N_r × active, row-major
    r: Vec<f64>,
    a: Vec<Amplitudes>,
    outcomes: Vec<Option<MemberOutcome>>,
}

impl<'m> Ensemble<'m> {
    /// Each member is `(r0, a0, noise stream)`.
    pub fn new(
        model: &'m EsnModel,
        members: Vec<(ReservoirState, Amplitudes, ChaCha8Rng)>,
        noise_enabled: bool,
    ) -> Result<Self, EsnError> {
        if !model.is_trained() {
            return Err(EsnError::NotTrained);
        }
        let n = model.n_reservoir();
        let m = members.len();
        let mut r = vec![0.0; n * m];
        let mut a = Vec::with_capacity(m);
        let mut rngs = Vec::with_capacity(m);
        for (b, (r0, a0, rng)) in members.into_iter().enumerate() {
            if r0.len() != n {
                return Err(EsnError::DimensionMismatch(format!(
                    "member {b} reservoir has {} entries, expected {n}",
                    r0.len()
                )));
            }
            if !a0.is_finite() {
                return Err(EsnError::NonFiniteInput { index: b });
            }
            for i in 0..n {
                r[i * m + b] = r0.0[i];
            }
            a.push(a0);
            rngs.push(rng);
        }
        Ok(Ensemble {
            model,
            noise: if noise_enabled { model.hyperparameters().noise_amplitude } else { 0.0 },
            ids: (0..m).collect(),
            rngs,
            r,
            a,
            outcomes: vec![None; m],
        })
    }

    /// Runs every member for up to `steps` steps. `observe(member, step, ã)`
    /// sees each prediction and may retire that member early.
    pub fn run<F>(mut self, steps: usize, mut observe: F) -> Vec<MemberOutcome>
    where
        F: FnMut(usize, usize, &Amplitudes) -> ControlFlow<()>,
    {
        let model = self.model;
        let n = model.n_reservoir();
        let weights = &model
            .readout()
            .expect("checked at construction")
            .weights;
        let mut next = Vec::new();
        let mut acc = Vec::new();

        for step in 1..=steps {
            let m = self.ids.len();
            if m == 0 {
                break;
            }
            next.resize(n * m, 0.0);
            model.w().mul_batch_into(&self.r, m, &mut next);
            for i in 0..n {
                let row = &mut next[i * m..(i + 1) * m];
                for (b, v) in row.iter_mut().enumerate() {
                    *v = model.activate(i, *v, &self.a[b]);
                }
            }
            if self.noise > 0.0 {
                for (b, rng) in self.rngs.iter_mut().enumerate() {
                    for i in 0..n {
                        next[i * m + b] += self.noise * (rng.random::<f64>() - 0.5);
                    }
                }
            }
            std::mem::swap(&mut self.r, &mut next);

            // readout, same accumulation order as `read_with`
            acc.resize(m, 0.0);
            let mut new_a = vec![Amplitudes::zeros(); m];
            for j in 0..N_MODES {
                let row = &weights[j * (n + 1)..(j + 1) * (n + 1)];
                acc.fill(0.0);
                for (i, w) in row[..n].iter().enumerate() {
                    let ri = &self.r[i * m..(i + 1) * m];
                    for (s, x) in acc.iter_mut().zip(ri) {
                        *s += w * x;
                    }
                }
                for b in 0..m {
                    new_a[b][j] = acc[b] + row[n];
                }
            }

            let mut retire = Vec::new();
            for (b, a) in new_a.into_iter().enumerate() {
                let id = self.ids[b];
                self.a[b] = a;
                if !(a.max_abs() <= DIVERGENCE_LIMIT) {
                    self.outcomes[id] = Some(MemberOutcome::Diverged { step });
                    retire.push(b);
                } else if observe(id, step, &a).is_break() {
                    self.outcomes[id] = Some(MemberOutcome::Stopped { step });
                    retire.push(b);
                }
            }
            if !retire.is_empty() {
                self.compact(&retire);
            }
        }

        self.outcomes
            .into_iter()
            .map(|o| o.unwrap_or(MemberOutcome::Completed { steps }))
            .collect()
    }

    fn compact(&mut self, retire: &[usize]) {
        let n = self.model.n_reservoir();
        let m = self.ids.len();
        let keep: Vec<usize> = (0..m).filter(|b| !retire.contains(b)).collect();
        let k = keep.len();
        let mut r = vec![0.0; n * k];
        for i in 0..n {
            for (nb, &b) in keep.iter().enumerate() {
                r[i * k + nb] = self.r[i * m + b];
            }
        }
        self.r = r;
        retain_slots(&mut self.ids, retire);
        retain_slots(&mut self.a, retire);
        retain_slots(&mut self.rngs, retire);
    }
}

fn retain_slots<T>(v: &mut Vec<T>, drop: &[usize]) {
    let mut slot = 0;
    v.retain(|_| {
        let keep = !drop.contains(&slot);
        slot += 1;
        keep
    });
}
