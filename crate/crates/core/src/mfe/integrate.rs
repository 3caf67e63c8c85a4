use super::{Amplitudes, MfeError, MfeSystem, Trajectory, BLOW_UP_LIMIT, N_MODES};

/// One classical fourth-order Runge–Kutta step of size `dt`.
#[inline]
pub fn rk4_step(sys: &MfeSystem, a: &Amplitudes, dt: f64) -> Amplitudes {
    let axpy = |x: &Amplitudes, k: &Amplitudes, h: f64| {
        let mut out = [0.0; N_MODES];
        for j in 0..N_MODES {
            out[j] = x.0[j] + h * k.0[j];
        }
        Amplitudes(out)
    };
    let k1 = sys.rhs(a);
    let k2 = sys.rhs(&axpy(a, &k1, 0.5 * dt));
    let k3 = sys.rhs(&axpy(a, &k2, 0.5 * dt));
    let k4 = sys.rhs(&axpy(a, &k3, dt));
    let mut out = [0.0; N_MODES];
    for j in 0..N_MODES {
        out[j] = a.0[j] + dt / 6.0 * (k1.0[j] + 2.0 * k2.0[j] + 2.0 * k3.0[j] + k4.0[j]);
    }
    Amplitudes(out)
}

/// Fixed-step integrator that hands out one state per sampling interval.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    sys: &'a MfeSystem,
    state: Amplitudes,
    dt: f64,
    steps_per_sample: u64,
    samples_taken: u64,
    t0: f64,
}

impl<'a> Stepper<'a> {
    pub fn new(
        sys: &'a MfeSystem,
        a0: Amplitudes,
        dt: f64,
        sample_every: f64,
    ) -> Result<Self, MfeError> {
        Self::starting_at(sys, a0, 0.0, dt, sample_every)
    }

    pub fn starting_at(
        sys: &'a MfeSystem,
        a0: Amplitudes,
        t0: f64,
        dt: f64,
        sample_every: f64,
    ) -> Result<Self, MfeError> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(MfeError::InvalidStep(format!("dt must be positive, got {dt}")));
        }
        if !(sample_every > 0.0 && sample_every.is_finite()) {
            return Err(MfeError::InvalidStep(format!(
                "sampling interval must be positive, got {sample_every}"
            )));
        }
        let ratio = sample_every / dt;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio.max(1.0) {
            return Err(MfeError::InvalidStep(format!(
                "sampling interval {sample_every} is not a multiple of dt = {dt}"
            )));
        }
        if !a0.is_finite() {
            return Err(MfeError::BlowUp { time: t0 });
        }
        Ok(Stepper {
            sys,
            state: a0,
            dt,
            steps_per_sample: n as u64,
            samples_taken: 0,
            t0,
        })
    }

    pub fn state(&self) -> &Amplitudes {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.t0 + self.samples_taken as f64 * self.sample_interval()
    }

    pub fn sample_interval(&self) -> f64 {
        self.steps_per_sample as f64 * self.dt
    }

    /// Advances by one sampling interval and returns the new state.
    pub fn advance(&mut self) -> Result<Amplitudes, MfeError> {
        let mut a = self.state;
        for step in 0..self.steps_per_sample {
            a = rk4_step(self.sys, &a, self.dt);
            if !(a.max_abs() <= BLOW_UP_LIMIT) {
                let base = self.t0 + self.samples_taken as f64 * self.sample_interval();
                return Err(MfeError::BlowUp {
                    time: base + (step + 1) as f64 * self.dt,
                });
            }
        }
        self.state = a;
        self.samples_taken += 1;
        Ok(a)
    }
}

/// Integrates from `a0` for `duration` time units and keeps every state that
/// falls on the `sample_every` grid, including the initial one.
pub fn integrate(
    sys: &MfeSystem,
    a0: Amplitudes,
    dt: f64,
    duration: f64,
    sample_every: f64,
) -> Result<Trajectory, MfeError> {
    let mut stepper = Stepper::new(sys, a0, dt, sample_every)?;
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(MfeError::InvalidStep(format!(
            "duration must be non-negative, got {duration}"
        )));
    }
    let n_samples = (duration / stepper.sample_interval() + 1e-9).floor() as usize;
    let mut states = Vec::with_capacity(n_samples + 1);
    states.push(a0);
    for _ in 0..n_samples {
        states.push(stepper.advance()?);
    }
    Ok(Trajectory::new(0.0, stepper.sample_interval(), states))
}
