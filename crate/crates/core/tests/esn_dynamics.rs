//! Behaviour of a full-size network trained on a turbulent stretch at Re = 300.

use std::ops::ControlFlow;
use std::sync::OnceLock;

use shearflow::esn::{null_rng, EsnHyperparameters, EsnModel};
use shearflow::experiments::initial_condition;
use shearflow::harness::one_step_nrmse;
use shearflow::mfe::{integrate, kinetic_energy, DomainGeometry, MfeSystem, Trajectory};
use shearflow::rng::StreamKind;

// initial condition 43 of seed 1 stays turbulent until t ≈ 6680
const IC: usize = 43;
const TRAIN_END: f64 = 6383.0;

fn setup() -> &'static (EsnModel, Trajectory) {
    static CELL: OnceLock<(EsnModel, Trajectory)> = OnceLock::new();
    CELL.get_or_init(|| {
        let sys = MfeSystem::new(300.0, DomainGeometry::default()).unwrap();
        let a0 = initial_condition(&sys, 0.3 * sys.geometry().energy_prefactor(), 1, IC).unwrap();
        let traj = integrate(&sys, a0, 1e-3, 6600.0, 1.0).unwrap();
        let mut model = EsnModel::new(EsnHyperparameters {
            seed: 1,
            ..Default::default()
        })
        .unwrap();
        let mut rng = model.noise_stream(StreamKind::TrainingNoise, 0);
        model.train(&traj.window(100.0, TRAIN_END).unwrap(), &mut rng).unwrap();
        (model, traj)
    })
}

#[test]
fn one_step_error_on_held_out_turbulence() {
    let (model, traj) = setup();
    let g = DomainGeometry::default();
    let held_out = traj.window(TRAIN_END + 1.0, 6600.0).unwrap();
    assert!(held_out.energies(&g).iter().all(|e| *e < 15.0));
    let nrmse = one_step_nrmse(model, &held_out.states, 1).unwrap();
    assert!(nrmse < 0.05, "NRMSE {nrmse}");
}

#[test]
fn noise_free_plateau_is_an_equilibrium() {
    let (model, traj) = setup();
    let g = DomainGeometry::default();
    let mut settled = 0;
    for start in [500usize, 1500, 2500, 3500, 4500] {
        let r0 = model.synchronize(&traj.states[start - 9..=start], &mut null_rng()).unwrap();
        let mut last = Vec::new();
        model
            .run_autonomous(&r0, &traj.states[start], 10_000, &mut null_rng(), false, |step, a| {
                if step > 9_900 {
                    last.push(*a);
                }
                ControlFlow::Continue(())
            })
            .unwrap();
        if kinetic_energy(&last[0], &g) > 15.0 {
            settled += 1;
            let drift = last.windows(2).map(|w| w[1].add(&w[0].scaled(-1.0)).max_abs()).fold(0.0, f64::max);
            assert!(drift < 1e-8, "plateau drifts by {drift:e} per step");
        }
    }
    assert!(settled > 0, "no run reached the high-energy plateau");
}
