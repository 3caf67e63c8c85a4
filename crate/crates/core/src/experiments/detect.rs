//! The laminarization rule: the kinetic energy stays above a threshold for a
//! whole window. The lifetime is the end of the first such window.

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorParams {
    /// Energy that counts as laminar (the laminar flow sits at ≈ 20.7).
    pub threshold: f64,
    /// Time the energy has to stay above `threshold`.
    pub window: f64,
}

impl Default for DetectorParams {
    fn default() -> Self {
        DetectorParams {
            threshold: 15.0,
            window: 1000.0,
        }
    }
}

impl DetectorParams {
    /// The window length in samples for a given sampling interval.
    pub fn window_samples(&self, dt_sample: f64) -> Result<usize, ExperimentError> {
        if !(self.threshold.is_finite() && self.window >= 0.0 && dt_sample > 0.0) {
            return Err(ExperimentError::InvalidParameter(format!(
                "detector threshold {} / window {} / sampling {dt_sample}",
                self.threshold, self.window
            )));
        }
        let w = self.window / dt_sample;
        if (w - w.round()).abs() > 1e-9 * w.max(1.0) {
            return Err(ExperimentError::InvalidParameter(format!(
                "window {} is not a multiple of the sampling interval {dt_sample}",
                self.window
            )));
        }
        Ok(w.round() as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Detection {
    /// Laminarization time `T`.
    Laminarized(f64),
    NotDetected,
    /// The series is shorter than one window.
    InsufficientData,
}

impl Detection {
    pub fn time(&self) -> Option<f64> {
        match self {
            Detection::Laminarized(t) => Some(*t),
            _ => None,
        }
    }
}

/// Streaming form of [`detect_laminarization`], fed one energy per sample.
#[derive(Debug, Clone)]
pub struct LaminarizationDetector {
    threshold: f64,
    needed: usize,
    run: usize,
    seen: usize,
    hit: Option<usize>,
}

impl LaminarizationDetector {
    pub fn new(params: DetectorParams, dt_sample: f64) -> Result<Self, ExperimentError> {
        Ok(LaminarizationDetector {
            threshold: params.threshold,
            // the window [T − w, T] holds w + 1 samples
            needed: params.window_samples(dt_sample)? + 1,
            run: 0,
            seen: 0,
            hit: None,
        })
    }

    /// Feeds the next sample. Returns the sample index of `T` the first time
    /// the rule is met.
    pub fn push(&mut self, energy: f64) -> Option<usize> {
        let idx = self.seen;
        self.seen += 1;
        if self.hit.is_some() {
            return None;
        }
        if energy > self.threshold {
            self.run += 1;
        } else {
            self.run = 0;
        }
        if self.run >= self.needed {
            self.hit = Some(idx);
            return self.hit;
        }
        None
    }

    pub fn hit(&self) -> Option<usize> {
        self.hit
    }

    pub fn samples_seen(&self) -> usize {
        self.seen
    }

    /// Whether the rule can still be met if at most `remaining` more samples
    /// arrive.
    pub fn still_possible(&self, remaining: usize) -> bool {
        self.hit.is_some() || self.run + remaining >= self.needed
    }
}

/// Earliest `T` such that every sample in `[T − window, T]` exceeds
/// `threshold`. Sample `i` sits at `t0 + i·dt_sample`.
pub fn detect_laminarization(
    energies: &[f64],
    t0: f64,
    dt_sample: f64,
    params: DetectorParams,
) -> Result<Detection, ExperimentError> {
    let mut det = LaminarizationDetector::new(params, dt_sample)?;
    if energies.len() < det.needed {
        return Ok(Detection::InsufficientData);
    }
    for e in energies {
        if let Some(i) = det.push(*e) {
            return Ok(Detection::Laminarized(t0 + i as f64 * dt_sample));
        }
    }
    Ok(Detection::NotDetected)
}
