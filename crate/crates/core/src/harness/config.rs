//! Run configuration: a sectioned TOML file where every key defaults to the
//! published setup.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::HarnessError;
use crate::esn::EsnHyperparameters;
use crate::experiments::{log_spaced, DetectorParams, EnsembleParams, LifetimeParams, PlamParams};
use crate::mfe::{DomainGeometry, MfeSystem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every random stream is derived from it.
    pub seed: u64,
    pub out: PathBuf,
    /// Noise in closed-loop predictions (training always uses it).
    pub prediction_noise: bool,
    pub flow: FlowSection,
    pub integration: IntegrationSection,
    pub esn: EsnSection,
    pub training: TrainingSection,
    pub predict: PredictSection,
    pub lifetime: LifetimeSection,
    pub earlywarn: EarlyWarnSection,
    pub plam: PlamSection,
    pub ablate: AblateSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 1,
            out: PathBuf::from("out"),
            prediction_noise: true,
            flow: FlowSection::default(),
            integration: IntegrationSection::default(),
            esn: EsnSection::default(),
            training: TrainingSection::default(),
            predict: PredictSection::default(),
            lifetime: LifetimeSection::default(),
            earlywarn: EarlyWarnSection::default(),
            plam: PlamSection::default(),
            ablate: AblateSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    pub re: f64,
    /// Streamwise period, 1.75π.
    pub lx: f64,
    /// Spanwise period, 1.2π.
    pub lz: f64,
}

impl Default for FlowSection {
    fn default() -> Self {
        let g = DomainGeometry::default();
        FlowSection {
            re: 300.0,
            lx: g.lx,
            lz: g.lz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitialKind {
    Random,
    Laminar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryFormat {
    Csv,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegrationSection {
    pub dt: f64,
    pub sample_every: f64,
    pub duration: f64,
    pub initial: InitialKind,
    /// Random initial conditions have kinetic energy `ic_energy_factor · Γx Γz`.
    pub ic_energy_factor: f64,
    pub format: TrajectoryFormat,
}

impl Default for IntegrationSection {
    fn default() -> Self {
        IntegrationSection {
            dt: 1e-3,
            sample_every: 1.0,
            duration: 10_000.0,
            initial: InitialKind::Random,
            ic_energy_factor: 0.3,
            format: TrajectoryFormat::Csv,
        }
    }
}

/// Network hyperparameters; the construction seed is the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EsnSection {
    pub n_reservoir: usize,
    pub spectral_radius: f64,
    pub sparsity: f64,
    pub noise_amplitude: f64,
    pub input_scale: f64,
    pub bias_scale: f64,
    pub ridge: f64,
    pub n_sync: usize,
}

impl Default for EsnSection {
    fn default() -> Self {
        let hp = EsnHyperparameters::default();
        EsnSection {
            n_reservoir: hp.n_reservoir,
            spectral_radius: hp.spectral_radius,
            sparsity: hp.sparsity,
            noise_amplitude: hp.noise_amplitude,
            input_scale: hp.input_scale,
            bias_scale: hp.bias_scale,
            ridge: hp.ridge,
            n_sync: hp.n_sync,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingSection {
    pub t_start: f64,
    pub t_end: f64,
    /// Skip the turbulence-only check on the training window.
    pub allow_laminar: bool,
}

impl Default for TrainingSection {
    fn default() -> Self {
        TrainingSection {
            t_start: 100.0,
            t_end: 5000.0,
            allow_laminar: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    pub t_start: f64,
    pub horizon: usize,
}

impl Default for PredictSection {
    fn default() -> Self {
        PredictSection {
            t_start: 5000.0,
            horizon: 10_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceChoice {
    Truth,
    Esn,
    Both,
}

impl SourceChoice {
    pub fn truth(&self) -> bool {
        matches!(self, SourceChoice::Truth | SourceChoice::Both)
    }

    pub fn esn(&self) -> bool {
        matches!(self, SourceChoice::Esn | SourceChoice::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LifetimeSection {
    pub source: SourceChoice,
    pub n_ic: usize,
    pub t_max: f64,
    /// Laminarization: energy above `threshold` for `window` time units.
    pub threshold: f64,
    pub window: f64,
}

impl Default for LifetimeSection {
    fn default() -> Self {
        LifetimeSection {
            source: SourceChoice::Truth,
            n_ic: 200,
            t_max: 60_000.0,
            threshold: 15.0,
            window: 1000.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EarlyWarnSection {
    pub n_ensemble: usize,
    pub horizon: f64,
    /// Scan times; each uses the `n_sync` true states ending there.
    pub times: Vec<f64>,
    /// Number of test states for the reference probability (0 skips it).
    pub n_reference: usize,
    /// Stretch of the dataset the test states are drawn from.
    pub reference_start: f64,
    pub reference_end: f64,
}

impl Default for EarlyWarnSection {
    fn default() -> Self {
        EarlyWarnSection {
            n_ensemble: 100,
            horizon: 2000.0,
            times: (0..5).map(|j| 13_840.0 + 100.0 * j as f64).collect(),
            n_reference: 100,
            reference_start: 0.0,
            reference_end: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlamSection {
    pub source: SourceChoice,
    pub n_energies: usize,
    pub e_min: f64,
    pub e_max: f64,
    pub n_pert: usize,
    pub horizon: f64,
    pub turb_threshold: f64,
}

impl Default for PlamSection {
    fn default() -> Self {
        PlamSection {
            source: SourceChoice::Truth,
            n_energies: 20,
            e_min: 1e-4,
            e_max: 1.0,
            n_pert: 50,
            horizon: 300.0,
            turb_threshold: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    /// Training windows `[t_start, t_end]`, typically nested.
    pub windows: Vec<[f64; 2]>,
    pub n_runs: usize,
    pub steps: usize,
}

impl Default for AblateSection {
    fn default() -> Self {
        AblateSection {
            windows: Vec::new(),
            n_runs: 10,
            steps: 10_000,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// SHA-256 of the canonical serialization, in hex. The output directory
    /// is left out so that relocating a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = PathBuf::new();
        hex_digest(c.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        self.geometry()?;
        if !(self.flow.re > 0.0 && self.flow.re.is_finite()) {
            return bad(format!("flow.re must be positive, got {}", self.flow.re));
        }
        let i = &self.integration;
        if !(i.dt > 0.0 && i.sample_every >= i.dt && i.duration >= 0.0 && i.ic_energy_factor > 0.0) {
            return bad("integration: dt, sample_every, duration and ic_energy_factor must be positive".into());
        }
        self.hyperparameters().validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if !(self.training.t_end > self.training.t_start && self.training.t_start >= 0.0) {
            return bad(format!(
                "training window [{}, {}] is empty",
                self.training.t_start, self.training.t_end
            ));
        }
        let l = &self.lifetime;
        if l.n_ic == 0 || !(l.t_max > 0.0 && l.threshold > 0.0 && l.window > 0.0) {
            return bad("lifetime: n_ic, t_max, threshold and window must be positive".into());
        }
        let e = &self.earlywarn;
        if e.n_ensemble == 0 || !(e.horizon > 0.0) {
            return bad("earlywarn: n_ensemble and horizon must be positive".into());
        }
        let p = &self.plam;
        if p.n_energies == 0 || p.n_pert == 0 || !(p.e_min > 0.0 && p.e_max >= p.e_min && p.horizon > 0.0 && p.turb_threshold > 0.0) {
            return bad("plam: counts, energies, horizon and threshold must be positive".into());
        }
        if p.n_energies > 1 && !(p.e_max > p.e_min) {
            return bad("plam: e_max must exceed e_min".into());
        }
        if self.ablate.n_runs == 0 || self.ablate.steps == 0 {
            return bad("ablate: n_runs and steps must be positive".into());
        }
        if self.ablate.windows.iter().any(|w| !(w[1] > w[0] && w[0] >= 0.0)) {
            return bad("ablate: every window needs t_start < t_end".into());
        }
        Ok(())
    }

    pub fn geometry(&self) -> Result<DomainGeometry, HarnessError> {
        DomainGeometry::new(self.flow.lx, self.flow.lz).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn system(&self) -> Result<MfeSystem, HarnessError> {
        MfeSystem::new(self.flow.re, self.geometry()?).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn hyperparameters(&self) -> EsnHyperparameters {
        let e = &self.esn;
        EsnHyperparameters {
            n_reservoir: e.n_reservoir,
            spectral_radius: e.spectral_radius,
            sparsity: e.sparsity,
            noise_amplitude: e.noise_amplitude,
            input_scale: e.input_scale,
            bias_scale: e.bias_scale,
            dt_model: self.integration.sample_every,
            ridge: e.ridge,
            n_sync: e.n_sync,
            seed: self.seed,
        }
    }

    pub fn detector(&self) -> DetectorParams {
        DetectorParams {
            threshold: self.lifetime.threshold,
            window: self.lifetime.window,
        }
    }

    pub fn ic_energy(&self) -> Result<f64, HarnessError> {
        Ok(self.integration.ic_energy_factor * self.geometry()?.energy_prefactor())
    }

    pub fn lifetime_params(&self) -> Result<LifetimeParams, HarnessError> {
        Ok(LifetimeParams {
            n_ic: self.lifetime.n_ic,
            ic_energy: self.ic_energy()?,
            t_max: self.lifetime.t_max,
            dt: self.integration.dt,
            sample_every: self.integration.sample_every,
            detector: self.detector(),
            noise_enabled: self.prediction_noise,
        })
    }

    pub fn ensemble_params(&self) -> EnsembleParams {
        EnsembleParams {
            n_ensemble: self.earlywarn.n_ensemble,
            horizon: self.earlywarn.horizon,
            detector: self.detector(),
            noise_enabled: self.prediction_noise,
        }
    }

    pub fn plam_params(&self) -> PlamParams {
        let p = &self.plam;
        PlamParams {
            energies: log_spaced(p.e_min, p.e_max, p.n_energies),
            n_pert: p.n_pert,
            horizon: p.horizon,
            turb_threshold: p.turb_threshold,
            dt: self.integration.dt,
            sample_every: self.integration.sample_every,
            noise_enabled: self.prediction_noise,
        }
    }
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_toml(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(cfg.hash(), back.hash());
        assert_eq!(cfg.hash().len(), 64);
    }

    #[test]
    fn partial_files_fill_in_defaults() {
        let cfg = RunConfig::from_toml("seed = 9\n[flow]\nre = 500.0\n").unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.flow.re, 500.0);
        assert_eq!(cfg.esn.n_reservoir, 1500);
        assert_eq!(cfg.plam.n_pert, 50);
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml("[flow]\nre = -1.0\n").is_err());
        assert!(RunConfig::from_toml("[flow]\nreynolds = 300.0\n").is_err());
        assert!(RunConfig::from_toml("[esn]\nsparsity = 1.0\n").is_err());
        assert!(RunConfig::from_toml("[training]\nt_start = 50.0\nt_end = 10.0\n").is_err());
    }
}
