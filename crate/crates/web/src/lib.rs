//! Browser bindings for a few cheap experiments on the nine-mode model.
//! Everything runs on the calling thread; keep the sizes small.

use shearflow::experiments::{
    initial_condition, laminarization_probability_curve, lifetime_experiment, DetectorParams, LifetimeParams,
    LifetimeSource, PlamParams, PlamSource, SurvivalCurve,
};
use shearflow::mfe::{integrate, DomainGeometry, MfeSystem};
use wasm_bindgen::prelude::*;

const DT: f64 = 1e-3;

fn system(re: f64) -> Result<MfeSystem, String> {
    MfeSystem::new(re, DomainGeometry::default()).map_err(|e| e.to_string())
}

/// Kinetic energy sampled once per time unit from a random initial state.
pub fn energy_trace(re: f64, duration: f64, seed: u64) -> Result<Vec<f64>, String> {
    let sys = system(re)?;
    let e0 = 0.3 * sys.geometry().energy_prefactor();
    let a0 = initial_condition(&sys, e0, seed, 0).map_err(|e| e.to_string())?;
    let traj = integrate(&sys, a0, DT, duration, 1.0).map_err(|e| e.to_string())?;
    Ok(traj.energies(sys.geometry()))
}

/// Survival curve of `n_ic` random initial states, flattened as
/// `[t0, S0, t1, S1, ...]`, followed by the number still turbulent at `t_max`.
pub fn survival(re: f64, n_ic: usize, t_max: f64, seed: u64) -> Result<Vec<f64>, String> {
    let sys = system(re)?;
    let params = LifetimeParams {
        n_ic,
        t_max,
        ..LifetimeParams::standard(&sys)
    };
    let samples = lifetime_experiment(LifetimeSource::Truth(&sys), &params, seed).map_err(|e| e.to_string())?;
    let curve = SurvivalCurve::from_samples(&samples).map_err(|e| e.to_string())?;
    let mut out: Vec<f64> = curve.points().into_iter().flat_map(|(t, s)| [t, s]).collect();
    out.push(curve.n_censored() as f64);
    Ok(out)
}

/// Fraction of perturbed laminar states that decay, at `n_energies`
/// log-spaced perturbation energies in `[e_min, e_max]`, flattened as
/// `[E0, p0, E1, p1, ...]`.
pub fn plam(re: f64, e_min: f64, e_max: f64, n_energies: usize, n_pert: usize, seed: u64) -> Result<Vec<f64>, String> {
    let sys = system(re)?;
    let params = PlamParams {
        energies: shearflow::experiments::log_spaced(e_min, e_max, n_energies),
        n_pert,
        ..PlamParams::default()
    };
    let curve = laminarization_probability_curve(PlamSource::Truth(&sys), &params, seed).map_err(|e| e.to_string())?;
    Ok(curve.energies.iter().zip(&curve.p_lam).flat_map(|(e, p)| [*e, *p]).collect())
}

/// Detector defaults, exposed so the page can draw the threshold line.
#[wasm_bindgen(js_name = laminarThreshold)]
pub fn laminar_threshold() -> f64 {
    DetectorParams::default().threshold
}

#[wasm_bindgen(js_name = energyTrace)]
pub fn energy_trace_js(re: f64, duration: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    energy_trace(re, duration, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = survivalCurve)]
pub fn survival_js(re: f64, n_ic: usize, t_max: f64, seed: u32) -> Result<Vec<f64>, JsError> {
    survival(re, n_ic, t_max, seed.into()).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = plamCurve)]
pub fn plam_js(re: f64, e_min: f64, e_max: f64, n_energies: usize, n_pert: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    plam(re, e_min, e_max, n_energies, n_pert, seed.into()).map_err(|e| JsError::new(&e))
}
