//! Empirical survival curves and the shifted-exponential lifetime law.

use super::ExperimentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Source {
    Truth,
    Esn,
}

impl Source {
    pub fn as_str(&self) -> &'static str {
        match self {
            Source::Truth => "truth",
            Source::Esn => "esn",
        }
    }
}

impl std::str::FromStr for Source {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "truth" => Ok(Source::Truth),
            "esn" => Ok(Source::Esn),
            other => Err(ExperimentError::InvalidParameter(format!("unknown source {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifetimeStatus {
    Laminarized,
    /// Still turbulent at the horizon; `lifetime` holds the horizon.
    Censored,
    /// The prediction blew up; excluded from every statistic.
    Diverged,
}

impl LifetimeStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            LifetimeStatus::Laminarized => "laminarized",
            LifetimeStatus::Censored => "censored",
            LifetimeStatus::Diverged => "diverged",
        }
    }
}

impl std::str::FromStr for LifetimeStatus {
    type Err = ExperimentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "laminarized" => Ok(LifetimeStatus::Laminarized),
            "censored" => Ok(LifetimeStatus::Censored),
            "diverged" => Ok(LifetimeStatus::Diverged),
            other => Err(ExperimentError::InvalidParameter(format!("unknown status {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeSample {
    /// Index of the initial condition.
    pub ic: usize,
    pub lifetime: f64,
    pub status: LifetimeStatus,
    pub source: Source,
    /// Master seed of the experiment that produced the sample.
    pub seed: u64,
}

/// `S(t) = #{T_i ≥ t} / N` over the non-diverged samples. A censored sample
/// is counted as surviving up to its horizon and drops out afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalCurve {
    /// Sorted lifetimes of the laminarized samples.
    pub lifetimes: Vec<f64>,
    /// Horizons of the censored samples, sorted.
    pub censored_at: Vec<f64>,
    pub n: usize,
}

impl SurvivalCurve {
    pub fn from_samples(samples: &[LifetimeSample]) -> Result<Self, ExperimentError> {
        let mut lifetimes = Vec::new();
        let mut censored_at = Vec::new();
        for s in samples {
            match s.status {
                LifetimeStatus::Laminarized => lifetimes.push(s.lifetime),
                LifetimeStatus::Censored => censored_at.push(s.lifetime),
                LifetimeStatus::Diverged => {}
            }
        }
        Self::new(lifetimes, censored_at)
    }

    pub fn new(mut lifetimes: Vec<f64>, mut censored_at: Vec<f64>) -> Result<Self, ExperimentError> {
        if lifetimes.is_empty() {
            return Err(ExperimentError::AllCensored(censored_at.len()));
        }
        if lifetimes.iter().chain(&censored_at).any(|t| !(*t >= 0.0 && t.is_finite())) {
            return Err(ExperimentError::InvalidParameter("lifetimes must be finite and non-negative".into()));
        }
        lifetimes.sort_by(f64::total_cmp);
        censored_at.sort_by(f64::total_cmp);
        let n = lifetimes.len() + censored_at.len();
        Ok(SurvivalCurve {
            lifetimes,
            censored_at,
            n,
        })
    }

    pub fn n_censored(&self) -> usize {
        self.censored_at.len()
    }

    /// `S(t)`, the fraction of samples still turbulent at `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let alive = |v: &[f64]| v.len() - v.partition_point(|x| *x < t);
        (alive(&self.lifetimes) + alive(&self.censored_at)) as f64 / self.n as f64
    }

    /// `(t, S(t))` at `t = 0` and at every distinct observed lifetime.
    pub fn points(&self) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, self.value_at(0.0))];
        for (i, t) in self.lifetimes.iter().enumerate() {
            if i > 0 && self.lifetimes[i - 1] == *t {
                continue;
            }
            if *t > 0.0 {
                out.push((*t, self.value_at(*t)));
            }
        }
        out
    }
}

/// Shifted exponential `S(t) = exp(−(t − t0)/τ)` for `t ≥ t0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentialFit {
    pub t0: f64,
    pub tau: f64,
    pub n_samples: usize,
}

impl ExponentialFit {
    pub fn survival(&self, t: f64) -> f64 {
        if t < self.t0 {
            1.0
        } else {
            (-(t - self.t0) / self.tau).exp()
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }
}

/// Maximum-likelihood shifted exponential: `t0 = min T_i`,
/// `τ = mean(T_i − t0)`.
pub fn fit_exponential_mle(lifetimes: &[f64]) -> Result<ExponentialFit, ExperimentError> {
    if lifetimes.len() < 2 {
        return Err(ExperimentError::TooFewSamples {
            needed: 2,
            got: lifetimes.len(),
        });
    }
    if lifetimes.iter().any(|t| !t.is_finite()) {
        return Err(ExperimentError::InvalidParameter("non-finite lifetime".into()));
    }
    let t0 = lifetimes.iter().copied().fold(f64::INFINITY, f64::min);
    let tau = lifetimes.iter().map(|t| t - t0).sum::<f64>() / lifetimes.len() as f64;
    if !(tau > 0.0) {
        return Err(ExperimentError::Degenerate(format!(
            "all {} lifetimes equal {t0}",
            lifetimes.len()
        )));
    }
    Ok(ExponentialFit {
        t0,
        tau,
        n_samples: lifetimes.len(),
    })
}

/// Kolmogorov–Smirnov distance between the empirical distribution of
/// `lifetimes` and the fitted law.
pub fn ks_statistic(lifetimes: &[f64], fit: &ExponentialFit) -> f64 {
    let mut x = lifetimes.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    let mut d = 0.0f64;
    for (i, t) in x.iter().enumerate() {
        let f = fit.cdf(*t);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    d
}

/// `|predicted − reference| / reference`.
pub fn relative_error(predicted: f64, reference: f64) -> f64 {
    (predicted - reference).abs() / reference.abs()
}
