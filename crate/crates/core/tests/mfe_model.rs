mod common;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use shearflow::mfe::{integrate, kinetic_energy, random_state_with_energy, rk4_step, Amplitudes, DomainGeometry, MfeSystem};

fn random_unit_box(rng: &mut ChaCha8Rng) -> Amplitudes {
    let mut a = Amplitudes::zeros();
    for v in a.0.iter_mut() {
        *v = rng.random_range(-1.0..=1.0);
    }
    a
}

fn norm(a: &[f64; 9]) -> f64 {
    a.iter().map(|v| v * v).sum::<f64>().sqrt()
}

#[test]
fn sparse_tensor_matches_dense_oracle() {
    let g = DomainGeometry::default();
    let sys = MfeSystem::new(400.0, g).unwrap();
    let dense = common::dense_tensor(g.lx, g.lz);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..1000 {
        let a = random_unit_box(&mut rng);
        let want = common::contract(&dense, &a.0);
        let got = sys.nonlinear(&a);
        let diff: Vec<f64> = (0..9).map(|j| got.0[j] - want[j]).collect();
        let rel = norm(&diff.try_into().unwrap()) / norm(&want);
        assert!(rel <= 1e-13, "relative mismatch {rel:e} at {a:?}");
    }
}

#[test]
fn nonzero_pattern_matches_dense_oracle() {
    let g = DomainGeometry::default();
    let dense = common::dense_tensor(g.lx, g.lz);
    let mut dense_pairs = std::collections::BTreeSet::new();
    for (j, tj) in dense.iter().enumerate() {
        for k in 0..9 {
            for l in k..9 {
                if tj[k][l] != 0.0 {
                    dense_pairs.insert((j, k, l));
                }
            }
        }
    }
    let sys = MfeSystem::new(400.0, g).unwrap();
    let sparse: std::collections::BTreeSet<_> = sys
        .quadratic_terms()
        .iter()
        .map(|t| {
            let (k, l) = (t.k.min(t.l) as usize, t.k.max(t.l) as usize);
            (t.row as usize, k, l)
        })
        .collect();
    assert_eq!(sparse, dense_pairs);
}

#[test]
fn quadratic_terms_conserve_energy() {
    let sys = MfeSystem::new(300.0, DomainGeometry::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..1000 {
        let a = random_unit_box(&mut rng);
        let n = sys.nonlinear(&a);
        let dot: f64 = (0..9).map(|j| a.0[j] * n.0[j]).sum();
        assert!(dot.abs() <= 1e-12 * norm(&a.0).powi(3), "a.N(a) = {dot:e}");
    }
}

#[test]
fn hand_written_oracle_conserves_energy_too() {
    let g = DomainGeometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..100 {
        let a = random_unit_box(&mut rng);
        let n = common::quadratic_by_hand(g.lx, g.lz, &a.0);
        let dot: f64 = (0..9).map(|j| a.0[j] * n[j]).sum();
        assert!(dot.abs() <= 1e-12);
    }
}

#[test]
fn laminar_state_is_fixed() {
    for re in [200.0, 250.0, 275.0, 300.0, 350.0, 500.0] {
        let sys = MfeSystem::new(re, DomainGeometry::default()).unwrap();
        assert!(sys.rhs(&Amplitudes::laminar()).max_abs() <= 1e-14);
        let next = rk4_step(&sys, &Amplitudes::laminar(), 1e-3);
        assert!(next.add(&Amplitudes::laminar().scaled(-1.0)).max_abs() <= 1e-15);
    }
}

#[test]
fn forcing_and_origin() {
    let sys = MfeSystem::new(500.0, DomainGeometry::default()).unwrap();
    assert!((sys.forcing() - PI * PI / 2000.0).abs() < 1e-18);
    let d = sys.rhs(&Amplitudes::zeros());
    assert!((d.0[0] - PI * PI / 2000.0).abs() < 1e-18);
    assert!(d.0[1..].iter().all(|v| *v == 0.0));
    let one = rk4_step(&sys, &Amplitudes::zeros(), 1e-3);
    assert!((one.0[0] / (1e-3 * PI * PI / 2000.0) - 1.0).abs() < 1e-3);
}

#[test]
fn laminar_energy() {
    let g = DomainGeometry::default();
    let e = kinetic_energy(&Amplitudes::laminar(), &g);
    assert!((e - 20.72).abs() <= 0.05, "E_lam = {e}");
    assert_eq!(kinetic_energy(&Amplitudes::zeros(), &g), 0.0);
    let e2 = kinetic_energy(&Amplitudes::laminar().scaled(2.0), &g);
    assert!((e2 - 4.0 * e).abs() < 1e-12);
}

#[test]
fn random_states_hit_target_energy() {
    let g = DomainGeometry::default();
    let target = 0.3 * g.energy_prefactor();
    let mut r1 = ChaCha8Rng::seed_from_u64(5);
    let mut r2 = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let a = random_state_with_energy(&mut r1, target, &g).unwrap();
        assert!((kinetic_energy(&a, &g) / target - 1.0).abs() < 1e-12);
        assert_eq!(a, random_state_with_energy(&mut r2, target, &g).unwrap());
    }
    assert!(random_state_with_energy(&mut r1, 0.0, &g).is_err());
}

#[test]
fn laminar_trajectory_is_constant() {
    let sys = MfeSystem::new(300.0, DomainGeometry::default()).unwrap();
    let traj = integrate(&sys, Amplitudes::laminar(), 1e-3, 100.0, 1.0).unwrap();
    assert_eq!(traj.len(), 101);
    assert!(traj.states.iter().all(|a| a.add(&Amplitudes::laminar().scaled(-1.0)).max_abs() < 1e-13));
}

/// Final state after `duration` with step `dt`, by plain repeated RK4.
fn run(sys: &MfeSystem, a0: Amplitudes, dt: f64, duration: f64) -> Amplitudes {
    let n = (duration / dt).round() as usize;
    (0..n).fold(a0, |a, _| rk4_step(sys, &a, dt))
}

#[test]
fn rk4_error_scales_with_fourth_power() {
    let g = DomainGeometry::default();
    let sys = MfeSystem::new(500.0, g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let a0 = random_state_with_energy(&mut rng, 0.3 * g.energy_prefactor(), &g).unwrap();
    // a turbulent starting point
    let start = run(&sys, a0, 1e-3, 200.0);
    assert!(kinetic_energy(&start, &g) < 15.0);
    let reference = run(&sys, start, 1e-5, 10.0);
    let err = |dt| run(&sys, start, dt, 10.0).add(&reference.scaled(-1.0)).max_abs();
    let (e1, e2) = (err(0.04), err(0.02));
    let ratio = e1 / e2;
    assert!((ratio / 16.0 - 1.0).abs() <= 0.2, "error ratio {ratio}");
}
