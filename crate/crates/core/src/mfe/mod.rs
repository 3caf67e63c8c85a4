//! Moehlis–Faisst–Eckhardt nine-mode model of sinusoidal shear flow.
//!
//! The state is the vector of nine mode amplitudes. Its evolution is
//!
//! ```text
//! da_j/dt = δ_1j β²/Re + λ_j(Re) a_j + Σ_{k,l} c_jkl a_k a_l
//! ```
//!
//! with β = π/2, so the forcing is π²/(4 Re). The quadratic tensor is stored as a
//! short list of its nonzero entries, which is what the RK4 hot loop walks.

mod integrate;

pub use integrate::{integrate, rk4_step, Stepper};

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Index, IndexMut};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of modes in the truncation.
pub const N_MODES: usize = 9;

/// Any mode amplitude above this magnitude aborts an integration.
pub const BLOW_UP_LIMIT: f64 = 1.0e3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MfeError {
    #[error("Reynolds number must be positive, got {0}")]
    InvalidReynolds(f64),
    #[error("domain periods must be positive, got Lx = {lx}, Lz = {lz}")]
    InvalidGeometry { lx: f64, lz: f64 },
    #[error("invalid integration parameters: {0}")]
    InvalidStep(String),
    #[error("state left the admissible range at t = {time}")]
    BlowUp { time: f64 },
    #[error("target energy must be positive, got {0}")]
    InvalidEnergy(f64),
    #[error("could not draw a nonzero random state")]
    DegenerateDraw,
}

/// The nine mode amplitudes `a_1 … a_9` (stored zero-based).
#[derive(Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Amplitudes(pub [f64; N_MODES]);

impl Amplitudes {
    pub const fn zeros() -> Self {
        Amplitudes([0.0; N_MODES])
    }

    /// The laminar fixed point `[1, 0, …, 0]`.
    pub const fn laminar() -> Self {
        let mut a = [0.0; N_MODES];
        a[0] = 1.0;
        Amplitudes(a)
    }

    pub fn as_array(&self) -> &[f64; N_MODES] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn norm_squared(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Amplitudes(self.0.map(|v| v * factor))
    }

    pub fn add(&self, other: &Amplitudes) -> Self {
        let mut out = self.0;
        for (o, v) in out.iter_mut().zip(other.0.iter()) {
            *o += v;
        }
        Amplitudes(out)
    }
}

impl fmt::Debug for Amplitudes {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.0.iter()).finish()
    }
}

impl Index<usize> for Amplitudes {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl IndexMut<usize> for Amplitudes {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

impl From<[f64; N_MODES]> for Amplitudes {
    fn from(a: [f64; N_MODES]) -> Self {
        Amplitudes(a)
    }
}

/// Periodic box of the model.
///
/// The defaults are Lx = 1.75π and Lz = 1.2π. Energies are reported as
/// `Lx · Lz · Σ a_j²`, which puts the laminar state at 2.1π² ≈ 20.7.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainGeometry {
    pub lx: f64,
    pub lz: f64,
}

impl Default for DomainGeometry {
    fn default() -> Self {
        DomainGeometry {
            lx: 1.75 * PI,
            lz: 1.2 * PI,
        }
    }
}

impl DomainGeometry {
    pub fn new(lx: f64, lz: f64) -> Result<Self, MfeError> {
        let g = DomainGeometry { lx, lz };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<(), MfeError> {
        if !(self.lx > 0.0 && self.lz > 0.0 && self.lx.is_finite() && self.lz.is_finite()) {
            return Err(MfeError::InvalidGeometry {
                lx: self.lx,
                lz: self.lz,
            });
        }
        Ok(())
    }

    /// Streamwise wavenumber 2π/Lx.
    pub fn alpha(&self) -> f64 {
        2.0 * PI / self.lx
    }

    /// Wall-normal wavenumber, fixed by the sinusoidal base flow.
    pub fn beta(&self) -> f64 {
        PI / 2.0
    }

    /// Spanwise wavenumber 2π/Lz.
    pub fn gamma(&self) -> f64 {
        2.0 * PI / self.lz
    }

    pub fn energy_prefactor(&self) -> f64 {
        self.lx * self.lz
    }
}

/// Kinetic energy `Lx·Lz·Σ a_j²`.
pub fn kinetic_energy(a: &Amplitudes, geometry: &DomainGeometry) -> f64 {
    geometry.energy_prefactor() * a.norm_squared()
}

/// One nonzero quadratic coefficient: contributes `coef · a_k · a_l` to `da_row/dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadraticTerm {
    pub row: u8,
    pub k: u8,
    pub l: u8,
    pub coef: f64,
}

/// Coefficients of the amplitude equations at one Reynolds number.
#[derive(Debug, Clone, PartialEq)]
pub struct MfeSystem {
    re: f64,
    geometry: DomainGeometry,
    linear: [f64; N_MODES],
    forcing: f64,
    quadratic: Vec<QuadraticTerm>,
    // quadratic[row_start[j]..row_start[j + 1]] feed row j
    row_start: [usize; N_MODES + 1],
}

impl MfeSystem {
    pub fn new(re: f64, geometry: DomainGeometry) -> Result<Self, MfeError> {
        if !(re > 0.0 && re.is_finite()) {
            return Err(MfeError::InvalidReynolds(re));
        }
        geometry.validate()?;

        let a = geometry.alpha();
        let b = geometry.beta();
        let g = geometry.gamma();

        let linear = [
            -b * b / re,
            -(4.0 * b * b / 3.0 + g * g) / re,
            -(b * b + g * g) / re,
            -(3.0 * a * a + 4.0 * b * b) / (3.0 * re),
            -(a * a + b * b) / re,
            -(3.0 * a * a + 4.0 * b * b + 3.0 * g * g) / (3.0 * re),
            -(a * a + b * b + g * g) / re,
            -(a * a + b * b + g * g) / re,
            -9.0 * b * b / re,
        ];

        let quadratic = merge_terms(interaction_terms(&geometry));
        let mut row_start = [0; N_MODES + 1];
        for t in &quadratic {
            row_start[t.row as usize + 1] += 1;
        }
        for j in 0..N_MODES {
            row_start[j + 1] += row_start[j];
        }

        Ok(MfeSystem {
            re,
            geometry,
            linear,
            forcing: b * b / re,
            quadratic,
            row_start,
        })
    }

    pub fn re(&self) -> f64 {
        self.re
    }

    pub fn geometry(&self) -> &DomainGeometry {
        &self.geometry
    }

    /// Constant forcing on the first mode, π²/(4 Re).
    pub fn forcing(&self) -> f64 {
        self.forcing
    }

    pub fn linear(&self) -> &[f64; N_MODES] {
        &self.linear
    }

    pub fn quadratic_terms(&self) -> &[QuadraticTerm] {
        &self.quadratic
    }

    /// Time derivative of the amplitudes.
    #[inline]
    pub fn rhs(&self, a: &Amplitudes) -> Amplitudes {
        let mut out = [0.0; N_MODES];
        for j in 0..N_MODES {
            out[j] = self.linear[j] * a.0[j];
        }
        out[0] += self.forcing;
        self.accumulate_nonlinear(&a.0, &mut out);
        Amplitudes(out)
    }

    /// Only the quadratic part of the right-hand side.
    pub fn nonlinear(&self, a: &Amplitudes) -> Amplitudes {
        let mut out = [0.0; N_MODES];
        self.accumulate_nonlinear(&a.0, &mut out);
        Amplitudes(out)
    }

    #[inline]
    fn accumulate_nonlinear(&self, a: &[f64; N_MODES], out: &mut [f64; N_MODES]) {
        // padded copy: masking the indices with 15 lets the compiler drop bounds checks
        let mut padded = [0.0; 16];
        padded[..N_MODES].copy_from_slice(a);
        for (j, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for t in &self.quadratic[self.row_start[j]..self.row_start[j + 1]] {
                acc += t.coef * padded[t.k as usize & 15] * padded[t.l as usize & 15];
            }
            *o += acc;
        }
    }

    pub fn kinetic_energy(&self, a: &Amplitudes) -> f64 {
        kinetic_energy(a, &self.geometry)
    }
}

/// Quadratic terms of the amplitude equations as they are usually written,
/// zero-based `(row, k, l, coef)`.
fn interaction_terms(geometry: &DomainGeometry) -> Vec<(usize, usize, usize, f64)> {
    let a = geometry.alpha();
    let b = geometry.beta();
    let g = geometry.gamma();

    let k_ag = (a * a + g * g).sqrt();
    let k_bg = (b * b + g * g).sqrt();
    let k_abg = (a * a + b * b + g * g).sqrt();
    let s6 = 6.0_f64.sqrt();
    let s32 = 1.5_f64.sqrt();
    let s23 = (2.0f64 / 3.0).sqrt();

    let abg = a * b * g;
    let bg_bg = s32 * b * g / k_bg;
    let bg_abg = s32 * b * g / k_abg;
    let a6 = a / s6;
    let tri = abg / (k_ag * k_bg);
    let tri_abg = abg / (k_ag * k_abg);
    let kkk = k_ag * k_bg * k_abg;

    vec![
        // a_1
        (0, 1, 2, bg_bg),
        (0, 5, 7, -bg_abg),
        // a_2
        (1, 3, 5, 10.0 / (3.0 * s6) * g * g / k_ag),
        (1, 4, 6, -g * g / (s6 * k_ag)),
        (1, 4, 7, -tri_abg / s6),
        (1, 0, 2, -bg_bg),
        (1, 2, 8, -bg_bg),
        // a_3
        (2, 3, 6, 2.0 / s6 * tri),
        (2, 4, 5, 2.0 / s6 * tri),
        (
            2,
            3,
            7,
            (b * b * (3.0 * a * a + g * g) - 3.0 * g * g * (a * a + g * g)) / (s6 * kkk),
        ),
        // a_4
        (3, 0, 4, -a6),
        (3, 1, 5, -10.0 / (3.0 * s6) * a * a / k_ag),
        (3, 2, 6, -s32 * tri),
        (3, 2, 7, -s32 * a * a * b * b / kkk),
        (3, 4, 8, -a6),
        // a_5
        (4, 0, 3, a6),
        (4, 1, 6, a * a / (s6 * k_ag)),
        (4, 1, 7, -tri_abg / s6),
        (4, 3, 8, a6),
        (4, 2, 5, 2.0 / s6 * tri),
        // a_6
        (5, 0, 6, a6),
        (5, 0, 7, bg_abg),
        (5, 1, 3, 10.0 / (3.0 * s6) * (a * a - g * g) / k_ag),
        (5, 2, 4, -2.0 * s23 * tri),
        (5, 6, 8, a6),
        (5, 7, 8, bg_abg),
        // a_7
        (6, 0, 5, -a6),
        (6, 5, 8, -a6),
        (6, 1, 4, (g * g - a * a) / (s6 * k_ag)),
        (6, 2, 3, tri / s6),
        // a_8
        (7, 1, 4, 2.0 / s6 * tri_abg),
        (7, 2, 3, g * g * (3.0 * a * a - b * b + 3.0 * g * g) / (s6 * kkk)),
        // a_9
        (8, 1, 2, bg_bg),
        (8, 5, 7, -bg_abg),
    ]
}

/// Orders each pair as `k ≤ l`, sums duplicates and drops exact zeros.
fn merge_terms(raw: Vec<(usize, usize, usize, f64)>) -> Vec<QuadraticTerm> {
    let mut merged: Vec<QuadraticTerm> = Vec::with_capacity(raw.len());
    for (row, k, l, coef) in raw {
        let (k, l) = if k <= l { (k, l) } else { (l, k) };
        match merged
            .iter_mut()
            .find(|t| t.row as usize == row && t.k as usize == k && t.l as usize == l)
        {
            Some(t) => t.coef += coef,
            None => merged.push(QuadraticTerm {
                row: row as u8,
                k: k as u8,
                l: l as u8,
                coef,
            }),
        }
    }
    merged.retain(|t| t.coef != 0.0);
    merged.sort_by_key(|t| (t.row, t.k, t.l));
    merged
}

/// Uniformly sampled sequence of states.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub t0: f64,
    pub dt_sample: f64,
    pub states: Vec<Amplitudes>,
}

impl Trajectory {
    pub fn new(t0: f64, dt_sample: f64, states: Vec<Amplitudes>) -> Self {
        assert!(dt_sample > 0.0, "sampling interval must be positive");
        Trajectory {
            t0,
            dt_sample,
            states,
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt_sample
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.states.len().saturating_sub(1))
    }

    /// Index of the sample at time `t`, if `t` falls on the sampling grid.
    pub fn index_of(&self, t: f64) -> Option<usize> {
        let x = (t - self.t0) / self.dt_sample;
        let i = x.round();
        if i < 0.0 || (x - i).abs() > 1e-6 || i as usize >= self.states.len() {
            return None;
        }
        Some(i as usize)
    }

    pub fn energies(&self, geometry: &DomainGeometry) -> Vec<f64> {
        self.states
            .iter()
            .map(|a| kinetic_energy(a, geometry))
            .collect()
    }

    /// Samples with times in `[start, end]`, as a new trajectory.
    pub fn window(&self, start: f64, end: f64) -> Option<Trajectory> {
        let i0 = self.index_of(start)?;
        let i1 = self.index_of(end)?;
        if i1 < i0 {
            return None;
        }
        Some(Trajectory {
            t0: self.time(i0),
            dt_sample: self.dt_sample,
            states: self.states[i0..=i1].to_vec(),
        })
    }
}

/// Draws every amplitude uniformly from [−1, 1] and rescales the vector so its
/// kinetic energy equals `energy`.
pub fn random_state_with_energy<R: Rng + ?Sized>(
    rng: &mut R,
    energy: f64,
    geometry: &DomainGeometry,
) -> Result<Amplitudes, MfeError> {
    if !(energy > 0.0 && energy.is_finite()) {
        return Err(MfeError::InvalidEnergy(energy));
    }
    for _ in 0..16 {
        let mut a = Amplitudes::zeros();
        for v in a.0.iter_mut() {
            *v = rng.random_range(-1.0..=1.0);
        }
        let e = kinetic_energy(&a, geometry);
        if e > 0.0 {
            return Ok(a.scaled((energy / e).sqrt()));
        }
    }
    Err(MfeError::DegenerateDraw)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn laminar_is_fixed_point() {
        for re in [200.0, 250.0, 275.0, 300.0, 350.0, 500.0] {
            let sys = MfeSystem::new(re, DomainGeometry::default()).unwrap();
            let d = sys.rhs(&Amplitudes::laminar());
            assert!(d.max_abs() <= 1e-14, "Re = {re}: {d:?}");
        }
    }

    #[test]
    fn forcing_at_origin() {
        let sys = MfeSystem::new(500.0, DomainGeometry::default()).unwrap();
        assert!((sys.forcing() - PI * PI / 2000.0).abs() < 1e-18);
        let d = sys.rhs(&Amplitudes::zeros());
        assert!((d[0] - PI * PI / 2000.0).abs() < 1e-18);
        assert!(d.0[1..].iter().all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_parameters() {
        let g = DomainGeometry::default();
        assert!(matches!(MfeSystem::new(0.0, g), Err(MfeError::InvalidReynolds(_))));
        assert!(matches!(MfeSystem::new(-3.0, g), Err(MfeError::InvalidReynolds(_))));
        let bad = DomainGeometry { lx: 0.0, lz: 1.0 };
        assert!(matches!(
            MfeSystem::new(300.0, bad),
            Err(MfeError::InvalidGeometry { .. })
        ));
        assert!(DomainGeometry::new(1.0, -1.0).is_err());
    }

    #[test]
    fn laminar_energy() {
        let g = DomainGeometry::default();
        let e = kinetic_energy(&Amplitudes::laminar(), &g);
        assert!((e - 2.1 * PI * PI).abs() < 1e-12);
        assert!((e - 20.72).abs() < 0.05);
        assert_eq!(kinetic_energy(&Amplitudes::zeros(), &g), 0.0);
        let e2 = kinetic_energy(&Amplitudes::laminar().scaled(2.0), &g);
        assert!((e2 - 4.0 * e).abs() < 1e-12);
    }

    #[test]
    fn random_state_hits_energy() {
        let g = DomainGeometry::default();
        let target = 0.3 * g.energy_prefactor();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = random_state_with_energy(&mut rng, target, &g).unwrap();
            assert!(((kinetic_energy(&a, &g) - target) / target).abs() < 1e-12);
        }
        let a1 = random_state_with_energy(&mut ChaCha8Rng::seed_from_u64(5), 1.0, &g).unwrap();
        let a2 = random_state_with_energy(&mut ChaCha8Rng::seed_from_u64(5), 1.0, &g).unwrap();
        assert_eq!(a1, a2);
        assert!(random_state_with_energy(&mut rng, 0.0, &g).is_err());
    }

    #[test]
    fn trajectory_window() {
        let states = (0..10).map(|i| Amplitudes::laminar().scaled(i as f64)).collect();
        let t = Trajectory::new(5.0, 1.0, states);
        let w = t.window(7.0, 9.0).unwrap();
        assert_eq!(w.t0, 7.0);
        assert_eq!(w.len(), 3);
        assert_eq!(w.states[0][0], 2.0);
        assert!(t.window(3.0, 9.0).is_none());
        assert_eq!(t.index_of(14.0), Some(9));
        assert_eq!(t.index_of(15.0), None);
    }
}
