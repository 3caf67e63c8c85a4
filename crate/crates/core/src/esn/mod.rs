//! Echo state network with a random bias and additive reservoir noise.
//!
//! The reservoir update and readout are
//!
//! ```text
//! r(t+Δt) = tanh(b + W r(t) + W_in a(t)) + ξ Z,   Z ~ U[−0.5, 0.5]^{N_r}
//! ã(t+Δt) = W_out [r(t+Δt); 1]
//! ```
//!
//! `W`, `W_in` and `b` are drawn once from the seed and never change; only
//! `W_out` is fitted, by linear least squares over a teacher-forced run.
//! Prediction closes the loop by feeding `ã` back in place of `a`.

mod ensemble;
pub mod persist;
pub mod readout;
pub mod sparse;
pub mod spectral;

pub use ensemble::{Ensemble, MemberOutcome};
pub use readout::TrainingReport;
pub use sparse::CsrMatrix;
pub use spectral::{estimate_spectral_radius, SpectralEstimate};

use std::ops::ControlFlow;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mfe::{Amplitudes, Trajectory, N_MODES};
use crate::rng::{stream, StreamKind};

/// Predicted amplitudes above this magnitude count as divergence.
pub const DIVERGENCE_LIMIT: f64 = 1.0e3;

#[derive(Debug, Error)]
pub enum EsnError {
    #[error("invalid hyperparameters: {0}")]
    InvalidHyperparameters(String),
    #[error("reservoir matrix has spectral radius {0:e}, cannot rescale")]
    DegenerateReservoir(f64),
    #[error("model has no trained readout")]
    NotTrained,
    #[error("input {index} is not finite")]
    NonFiniteInput { index: usize },
    #[error("synchronization needs {needed} states, got {got}")]
    InsufficientSync { needed: usize, got: usize },
    #[error("training set too short: {got} samples, need at least {needed}")]
    InsufficientTraining { needed: usize, got: usize },
    #[error("least-squares problem is rank deficient (diagonal ratio {ratio:e})")]
    RankDeficient { ratio: f64 },
    #[error("prediction diverged at step {step}")]
    Diverged { step: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("malformed model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EsnHyperparameters {
    pub n_reservoir: usize,
    pub spectral_radius: f64,
    /// Probability that an entry of `W` is exactly zero.
    pub sparsity: f64,
    /// Amplitude ξ of the uniform reservoir noise.
    pub noise_amplitude: f64,
    pub input_scale: f64,
    pub bias_scale: f64,
    /// Sampling interval of the data the model consumes and emits.
    pub dt_model: f64,
    /// Tikhonov term on the reservoir weights of the readout; zero reproduces
    /// plain least squares.
    pub ridge: f64,
    /// Number of true states used to synchronize the reservoir.
    pub n_sync: usize,
    pub seed: u64,
}

impl Default for EsnHyperparameters {
    fn default() -> Self {
        EsnHyperparameters {
            n_reservoir: 1500,
            spectral_radius: 0.5,
            sparsity: 0.9,
            noise_amplitude: 1e-3,
            input_scale: 1.0,
            bias_scale: 1.0,
            dt_model: 1.0,
            ridge: 0.0,
            n_sync: 10,
            seed: 0,
        }
    }
}

impl EsnHyperparameters {
    pub fn validate(&self) -> Result<(), EsnError> {
        let bad = |m: String| Err(EsnError::InvalidHyperparameters(m));
        if self.n_reservoir < N_MODES {
            return bad(format!(
                "reservoir size {} is smaller than the input dimension {N_MODES}",
                self.n_reservoir
            ));
        }
        if self.n_reservoir > u32::MAX as usize {
            return bad("reservoir size exceeds 32-bit indexing".into());
        }
        if !(self.spectral_radius > 0.0 && self.spectral_radius.is_finite()) {
            return bad(format!("spectral radius {} must be positive", self.spectral_radius));
        }
        if !(0.0..1.0).contains(&self.sparsity) {
            return bad(format!("sparsity {} outside [0, 1)", self.sparsity));
        }
        if !(self.noise_amplitude >= 0.0 && self.noise_amplitude.is_finite()) {
            return bad(format!("noise amplitude {} must be non-negative", self.noise_amplitude));
        }
        if !(self.input_scale > 0.0 && self.bias_scale > 0.0) {
            return bad("input and bias scales must be positive".into());
        }
        if !(self.dt_model > 0.0) {
            return bad("model time step must be positive".into());
        }
        if !(self.ridge >= 0.0) {
            return bad("ridge term must be non-negative".into());
        }
        if self.n_sync < 1 {
            return bad("synchronization needs at least one state".into());
        }
        Ok(())
    }
}

/// Reservoir activations `r(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReservoirState(pub Vec<f64>);

impl ReservoirState {
    pub fn zeros(n: usize) -> Self {
        ReservoirState(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Trained linear map from `[r; 1]` to amplitudes, `N_MODES × (N_r + 1)` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EsnModel {
    hp: EsnHyperparameters,
    w: CsrMatrix,
    /// `N_r × N_MODES`, row-major.
    w_in: Vec<f64>,
    bias: Vec<f64>,
    readout: Option<Readout>,
}

impl EsnModel {
    /// Draws the fixed random weights. `W` entries are zero with probability
    /// `sparsity` and uniform in [−1, 1] otherwise, then rescaled to the
    /// requested spectral radius.
    pub fn new(hp: EsnHyperparameters) -> Result<Self, EsnError> {
        hp.validate()?;
        let n = hp.n_reservoir;
        let mut rng = stream(hp.seed, StreamKind::Reservoir, 0);

        let mut triplets = Vec::with_capacity(((1.0 - hp.sparsity) * (n * n) as f64 * 1.1) as usize);
        for i in 0..n {
            for j in 0..n {
                if rng.random::<f64>() >= hp.sparsity {
                    let v: f64 = rng.random_range(-1.0..=1.0);
                    triplets.push((i as u32, j as u32, v));
                }
            }
        }
        let mut w = CsrMatrix::from_triplets(n, n, triplets)?;
        let raw = estimate_spectral_radius(&w, spectral::DEFAULT_TOL, spectral::DEFAULT_MAX_ITER);
        if !(raw.radius >= 1e-12) {
            return Err(EsnError::DegenerateReservoir(raw.radius));
        }
        w.scale(hp.spectral_radius / raw.radius);

        let w_in = (0..n * N_MODES)
            .map(|_| hp.input_scale * rng.random_range(-1.0..=1.0))
            .collect();
        let bias = (0..n)
            .map(|_| hp.bias_scale * rng.random_range(-1.0..=1.0))
            .collect();

        Ok(EsnModel {
            hp,
            w,
            w_in,
            bias,
            readout: None,
        })
    }

    /// Assembles a model from explicit weights.
    pub fn from_parts(
        hp: EsnHyperparameters,
        w: CsrMatrix,
        w_in: Vec<f64>,
        bias: Vec<f64>,
        readout: Option<Readout>,
    ) -> Result<Self, EsnError> {
        hp.validate()?;
        let n = hp.n_reservoir;
        let mismatch = |m: String| Err(EsnError::DimensionMismatch(m));
        if w.n_rows() != n || w.n_cols() != n {
            return mismatch(format!("W is {}x{}, expected {n}x{n}", w.n_rows(), w.n_cols()));
        }
        if w_in.len() != n * N_MODES {
            return mismatch(format!("W_in has {} entries, expected {}", w_in.len(), n * N_MODES));
        }
        if bias.len() != n {
            return mismatch(format!("bias has {} entries, expected {n}", bias.len()));
        }
        if let Some(r) = &readout {
            if r.weights.len() != N_MODES * (n + 1) {
                return mismatch(format!(
                    "W_out has {} entries, expected {}",
                    r.weights.len(),
                    N_MODES * (n + 1)
                ));
            }
        }
        Ok(EsnModel {
            hp,
            w,
            w_in,
            bias,
            readout,
        })
    }

    pub fn hyperparameters(&self) -> &EsnHyperparameters {
        &self.hp
    }

    pub fn n_reservoir(&self) -> usize {
        self.hp.n_reservoir
    }

    pub fn w(&self) -> &CsrMatrix {
        &self.w
    }

    pub fn w_in(&self) -> &[f64] {
        &self.w_in
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn readout(&self) -> Option<&Readout> {
        self.readout.as_ref()
    }

    pub fn is_trained(&self) -> bool {
        self.readout.is_some()
    }

    pub fn set_readout(&mut self, readout: Readout) -> Result<(), EsnError> {
        if readout.weights.len() != N_MODES * (self.hp.n_reservoir + 1) {
            return Err(EsnError::DimensionMismatch("readout size".into()));
        }
        self.readout = Some(readout);
        Ok(())
    }

    /// Noise source for a given purpose, derived from the model seed.
    pub fn noise_stream(&self, kind: StreamKind, unit: u64) -> ChaCha8Rng {
        stream(self.hp.seed, kind, unit)
    }

    /// One reservoir update `out = tanh(b + W r + W_in a) + ξ Z`.
    pub fn step_reservoir<R: Rng + ?Sized>(
        &self,
        r: &[f64],
        a: &Amplitudes,
        noise: f64,
        rng: &mut R,
        out: &mut [f64],
    ) {
        self.w.mul_vec_into(r, out);
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.activate(i, *o, a);
        }
        if noise > 0.0 {
            for o in out.iter_mut() {
                *o += noise * (rng.random::<f64>() - 0.5);
            }
        }
    }

    #[inline]
    fn activate(&self, i: usize, wr: f64, a: &Amplitudes) -> f64 {
        let row = &self.w_in[i * N_MODES..(i + 1) * N_MODES];
        let mut pre = wr + self.bias[i];
        for j in 0..N_MODES {
            pre += row[j] * a.0[j];
        }
        pre.tanh()
    }

    /// `W_out [r; 1]`.
    pub fn read(&self, r: &[f64]) -> Result<Amplitudes, EsnError> {
        let readout = self.readout.as_ref().ok_or(EsnError::NotTrained)?;
        Ok(read_with(&readout.weights, r))
    }

    /// Teacher-forced run: one reservoir state per input, `r_{k+1}` computed
    /// from `r_k` and `inputs[k]`.
    pub fn drive<R: Rng + ?Sized>(
        &self,
        inputs: &[Amplitudes],
        r0: &ReservoirState,
        rng: &mut R,
    ) -> Result<Vec<ReservoirState>, EsnError> {
        let n = self.hp.n_reservoir;
        if r0.len() != n {
            return Err(EsnError::DimensionMismatch(format!(
                "initial reservoir has {} entries, expected {n}",
                r0.len()
            )));
        }
        let mut out = Vec::with_capacity(inputs.len());
        let mut r = r0.0.clone();
        let mut next = vec![0.0; n];
        for (index, a) in inputs.iter().enumerate() {
            if !a.is_finite() {
                return Err(EsnError::NonFiniteInput { index });
            }
            self.step_reservoir(&r, a, self.hp.noise_amplitude, rng, &mut next);
            std::mem::swap(&mut r, &mut next);
            out.push(ReservoirState(r.clone()));
        }
        Ok(out)
    }

    /// Warms the reservoir up from zero over the true history `recent` and
    /// returns the reservoir state aligned with its last element.
    ///
    /// With the default `n_sync = 10` the states `a(−9)…a(−1)` generate
    /// `r(−8)…r(0)`; `a(0)` is then the first input of the prediction. Longer
    /// histories are truncated to their last `n_sync` states.
    pub fn synchronize<R: Rng + ?Sized>(
        &self,
        recent: &[Amplitudes],
        rng: &mut R,
    ) -> Result<ReservoirState, EsnError> {
        let needed = self.hp.n_sync;
        if recent.len() < needed {
            return Err(EsnError::InsufficientSync {
                needed,
                got: recent.len(),
            });
        }
        let window = &recent[recent.len() - needed..recent.len() - 1];
        let zero = ReservoirState::zeros(self.hp.n_reservoir);
        Ok(self
            .drive(window, &zero, rng)?
            .pop()
            .unwrap_or(zero))
    }

    /// Closed-loop run for `steps` steps from `(r0, a0)`. `observe` sees each
    /// new prediction with its 1-based step index and may stop the run early.
    /// Returns the number of steps taken.
    pub fn run_autonomous<R, F>(
        &self,
        r0: &ReservoirState,
        a0: &Amplitudes,
        steps: usize,
        rng: &mut R,
        noise_enabled: bool,
        mut observe: F,
    ) -> Result<usize, EsnError>
    where
        R: Rng + ?Sized,
        F: FnMut(usize, &Amplitudes) -> ControlFlow<()>,
    {
        let readout = self.readout.as_ref().ok_or(EsnError::NotTrained)?;
        let n = self.hp.n_reservoir;
        if r0.len() != n {
            return Err(EsnError::DimensionMismatch(format!(
                "initial reservoir has {} entries, expected {n}",
                r0.len()
            )));
        }
        if !a0.is_finite() {
            return Err(EsnError::NonFiniteInput { index: 0 });
        }
        let noise = if noise_enabled { self.hp.noise_amplitude } else { 0.0 };
        let mut r = r0.0.clone();
        let mut next = vec![0.0; n];
        let mut a = *a0;
        for step in 1..=steps {
            self.step_reservoir(&r, &a, noise, rng, &mut next);
            std::mem::swap(&mut r, &mut next);
            a = read_with(&readout.weights, &r);
            if !(a.max_abs() <= DIVERGENCE_LIMIT) {
                return Err(EsnError::Diverged { step });
            }
            if observe(step, &a).is_break() {
                return Ok(step);
            }
        }
        Ok(steps)
    }

    /// Closed-loop prediction of `horizon` steps. The returned trajectory
    /// starts with `a0` at time 0.
    pub fn predict<R: Rng + ?Sized>(
        &self,
        r0: &ReservoirState,
        a0: &Amplitudes,
        horizon: usize,
        rng: &mut R,
        noise_enabled: bool,
    ) -> Result<Trajectory, EsnError> {
        let mut states = Vec::with_capacity(horizon + 1);
        states.push(*a0);
        self.run_autonomous(r0, a0, horizon, rng, noise_enabled, |_, a| {
            states.push(*a);
            ControlFlow::Continue(())
        })?;
        Ok(Trajectory::new(0.0, self.hp.dt_model, states))
    }

    /// Fits `W_out` on a training trajectory; see [`readout::train`].
    pub fn train<R: Rng + ?Sized>(
        &mut self,
        training: &Trajectory,
        rng: &mut R,
    ) -> Result<TrainingReport, EsnError> {
        let (readout, report) = readout::train(self, training, rng)?;
        self.readout = Some(readout);
        Ok(report)
    }
}

#[inline]
pub(crate) fn read_with(weights: &[f64], r: &[f64]) -> Amplitudes {
    let n = r.len();
    let mut out = [0.0; N_MODES];
    for (j, o) in out.iter_mut().enumerate() {
        let row = &weights[j * (n + 1)..(j + 1) * (n + 1)];
        let mut acc = 0.0;
        for (w, x) in row[..n].iter().zip(r) {
            acc += w * x;
        }
        *o = acc + row[n];
    }
    Amplitudes(out)
}

/// Deterministic RNG for callers that want noise-free runs to still satisfy
/// the `Rng` bound.
pub fn null_rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_hp(seed: u64) -> EsnHyperparameters {
        EsnHyperparameters {
            n_reservoir: 60,
            sparsity: 0.8,
            seed,
            ..Default::default()
        }
    }

    fn inputs(n: usize) -> Vec<Amplitudes> {
        (0..n)
            .map(|t| {
                let mut a = Amplitudes::zeros();
                for j in 0..N_MODES {
                    a[j] = (0.1 * t as f64 + j as f64).sin() * 0.5;
                }
                a
            })
            .collect()
    }

    #[test]
    fn validates_hyperparameters() {
        let ok = EsnHyperparameters::default();
        assert!(ok.validate().is_ok());
        for bad in [
            EsnHyperparameters { n_reservoir: 5, ..ok.clone() },
            EsnHyperparameters { spectral_radius: 0.0, ..ok.clone() },
            EsnHyperparameters { sparsity: 1.0, ..ok.clone() },
            EsnHyperparameters { sparsity: -0.1, ..ok.clone() },
            EsnHyperparameters { noise_amplitude: -1.0, ..ok.clone() },
            EsnHyperparameters { n_sync: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(EsnError::InvalidHyperparameters(_))));
        }
    }

    #[test]
    fn construction_contract() {
        let m = EsnModel::new(small_hp(3)).unwrap();
        let est = estimate_spectral_radius(m.w(), 1e-9, 20_000);
        assert!((est.radius - 0.5).abs() <= 0.005, "{est:?}");
        assert!((m.w().zero_fraction() - 0.8).abs() <= 0.05);
        assert!(m.w_in().iter().all(|v| v.abs() <= 1.0));
        assert!(m.bias().iter().all(|v| v.abs() <= 1.0));
        assert!(!m.is_trained());
        assert_eq!(m, EsnModel::new(small_hp(3)).unwrap());
        assert_ne!(m.w(), EsnModel::new(small_hp(4)).unwrap().w());
    }

    #[test]
    fn zero_weights_give_zero_states() {
        let hp = EsnHyperparameters {
            n_reservoir: 12,
            noise_amplitude: 0.0,
            ..Default::default()
        };
        let m = EsnModel::from_parts(hp, CsrMatrix::zeros(12, 12), vec![0.0; 12 * 9], vec![0.0; 12], None)
            .unwrap();
        let states = m.drive(&inputs(20), &ReservoirState::zeros(12), &mut null_rng()).unwrap();
        assert!(states.iter().all(|s| s.max_abs() == 0.0));
    }

    #[test]
    fn drive_is_bounded_and_deterministic() {
        let m = EsnModel::new(small_hp(1)).unwrap();
        let xi = m.hyperparameters().noise_amplitude;
        let run = |seed| {
            m.drive(&inputs(200), &ReservoirState::zeros(60), &mut ChaCha8Rng::seed_from_u64(seed))
                .unwrap()
        };
        let a = run(9);
        assert_eq!(a, run(9));
        assert_ne!(a, run(10));
        assert!(a.iter().all(|s| s.max_abs() <= 1.0 + xi / 2.0));

        let quiet = EsnModel {
            hp: EsnHyperparameters { noise_amplitude: 0.0, ..small_hp(1) },
            ..m.clone()
        };
        let q = quiet.drive(&inputs(200), &ReservoirState::zeros(60), &mut null_rng()).unwrap();
        assert!(q.iter().all(|s| s.max_abs() <= 1.0));
    }

    #[test]
    fn drive_rejects_non_finite() {
        let m = EsnModel::new(small_hp(1)).unwrap();
        let mut xs = inputs(5);
        xs[3][2] = f64::NAN;
        assert!(matches!(
            m.drive(&xs, &ReservoirState::zeros(60), &mut null_rng()),
            Err(EsnError::NonFiniteInput { index: 3 })
        ));
    }

    #[test]
    fn synchronize_composes_with_drive() {
        let hp = EsnHyperparameters { noise_amplitude: 0.0, ..small_hp(2) };
        let m = EsnModel::new(hp).unwrap();
        let xs = inputs(10);
        let r0 = m.synchronize(&xs, &mut null_rng()).unwrap();
        let direct = m.drive(&xs[..9], &ReservoirState::zeros(60), &mut null_rng()).unwrap();
        assert_eq!(&r0, direct.last().unwrap());

        // continuing from the synchronized state equals one long drive
        let tail = inputs(15);
        let cont = m.drive(&tail[..5], &r0, &mut null_rng()).unwrap();
        let mut joined = xs[..9].to_vec();
        joined.extend_from_slice(&tail[..5]);
        let long = m.drive(&joined, &ReservoirState::zeros(60), &mut null_rng()).unwrap();
        assert_eq!(cont.last(), long.last());

        assert!(matches!(
            m.synchronize(&xs[..4], &mut null_rng()),
            Err(EsnError::InsufficientSync { needed: 10, got: 4 })
        ));
    }

    #[test]
    fn synchronize_zero_history() {
        let hp = EsnHyperparameters { n_reservoir: 10, noise_amplitude: 0.0, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let w: Vec<f64> = (0..100).map(|_| rng.random_range(-0.1..0.1)).collect();
        let m = EsnModel::from_parts(hp, CsrMatrix::from_dense(10, 10, &w), vec![0.3; 90], vec![0.0; 10], None)
            .unwrap();
        let r = m.synchronize(&[Amplitudes::zeros(); 10], &mut null_rng()).unwrap();
        assert_eq!(r.max_abs(), 0.0);
    }

    #[test]
    fn predict_needs_training() {
        let m = EsnModel::new(small_hp(1)).unwrap();
        let r = ReservoirState::zeros(60);
        assert!(matches!(
            m.predict(&r, &Amplitudes::zeros(), 3, &mut null_rng(), true),
            Err(EsnError::NotTrained)
        ));
    }

    #[test]
    fn predict_horizon_zero_and_divergence() {
        let mut m = EsnModel::new(small_hp(1)).unwrap();
        let n = 60;
        // readout that amplifies the bias column without bound
        let mut weights = vec![0.0; N_MODES * (n + 1)];
        weights[n] = 10.0;
        m.set_readout(Readout { weights: weights.clone() }).unwrap();
        let r = ReservoirState::zeros(n);
        let a0 = Amplitudes::laminar();
        let t = m.predict(&r, &a0, 0, &mut null_rng(), true).unwrap();
        assert_eq!(t.states, vec![a0]);

        weights[n] = 2.0e3;
        m.set_readout(Readout { weights }).unwrap();
        assert!(matches!(
            m.predict(&r, &a0, 5, &mut null_rng(), true),
            Err(EsnError::Diverged { step: 1 })
        ));
    }
}
