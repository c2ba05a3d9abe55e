use std::f64::consts::PI;

use magg_core::diagnostics::{energy_order, etar_sweep, modelh_sweep, DiffAccumulator};
use magg_core::io::{parse_config, read_snapshot, write_snapshot};
use magg_core::simulation::{cfl_dt, initial_state, run};
use magg_core::{make_grid, Field, SimConfig, Simulation, State, VecField};
use serde_json::json;

fn config(value: serde_json::Value) -> SimConfig {
    parse_config(&value.to_string()).unwrap().0
}

fn small_config(n: usize, t_end: f64) -> SimConfig {
    config(json!({
        "grid": { "n": n, "box_length": 2.0 * PI },
        "params": {
            "sigma": 1.0, "eps": 0.5, "rho1": 1.4, "rho2": 1.0,
            "eta": [0.2, 0.15], "eta_r": [0.1, 0.05], "potential": "quartic"
        },
        "dt": 2e-3,
        "t_end": t_end,
        "seed": 3,
        "initial_condition": {
            "type": "uniform_plus_modes",
            "phi": { "mean": -0.1, "modes": [
                { "kx": 1, "ky": 0, "amplitude": 0.4 },
                { "kx": 1, "ky": 1, "amplitude": 0.2 }
            ]},
            "stream": { "modes": [{ "kx": 1, "ky": -1, "amplitude": 0.3 }] },
            "omega": { "modes": [{ "kx": 0, "ky": 1, "amplitude": 0.2 }] }
        }
    }))
}

#[test]
fn zero_horizon_returns_the_initial_state() {
    let cfg = small_config(16, 0.0);
    let out = run(&cfg, None).unwrap();
    assert_eq!(out.ledger.rows.len(), 1);
    assert_eq!(out.state.time, 0.0);
    let initial = initial_state(&cfg).unwrap();
    assert_eq!(out.state.phi.values(), initial.phi.values());
}

#[test]
fn cfl_rule_examples() {
    let g = make_grid(64, 2.0 * PI).unwrap();
    let p = magg_core::ModelParams::default();
    let state = |speed: f64| {
        let u = VecField::new(Field::constant(&g, speed), Field::zeros(&g));
        State::new(0.0, u, Field::zeros(&g), Field::zeros(&g), &p).unwrap()
    };
    assert_eq!(cfl_dt(&state(0.0), 0.4, &g, 0.5), 0.5);
    let one = cfl_dt(&state(1.0), 0.4, &g, 1.0);
    assert!((one - 0.4 * 2.0 * PI / 64.0).abs() < 1e-15);
    assert!((one - 0.03927).abs() < 1e-5);
    let ten = cfl_dt(&state(10.0), 0.4, &g, 1.0);
    assert!((ten * 10.0 - one).abs() < 1e-15);
}

#[test]
fn random_phases_follow_the_seed() {
    let cfg = small_config(16, 0.0);
    let a = initial_state(&cfg).unwrap();
    let b = initial_state(&cfg).unwrap();
    assert_eq!(a.phi.values(), b.phi.values());
    let mut other = cfg.clone();
    other.seed = 4;
    let c = initial_state(&other).unwrap();
    assert_ne!(a.phi.values(), c.phi.values());
}

#[test]
fn initial_velocity_is_solenoidal() {
    let s = initial_state(&small_config(32, 0.0)).unwrap();
    assert!(s.u.max_norm() > 0.1);
    assert!(s.u.divergence().max_abs() < 1e-13);
}

#[test]
fn runs_are_deterministic() {
    let cfg = small_config(16, 0.05);
    let a = run(&cfg, None).unwrap();
    let b = run(&cfg, None).unwrap();
    assert_eq!(a.ledger, b.ledger);
    assert_eq!(a.state.u.x.values(), b.state.u.x.values());
    assert_eq!(a.state.omega.values(), b.state.omega.values());
}

#[test]
fn mass_is_conserved_and_energy_decays() {
    let cfg = small_config(32, 0.4);
    let out = run(&cfg, None).unwrap();
    let rows = &out.ledger.rows;
    let m0 = rows[0].mass;
    for r in rows {
        assert!((r.mass - m0).abs() <= 1e-12 * 4.0 * PI * PI);
        assert!(r.div_residual < 1e-12);
    }
    let max_res = out.ledger.max_abs_residual();
    for w in rows.windows(2) {
        let dt = w[1].t - w[0].t;
        assert!(w[1].energy.total <= w[0].energy.total + dt * max_res);
    }
    assert!(rows.last().unwrap().energy.total < rows[0].energy.total);
}

#[test]
fn restart_from_snapshot_matches_uninterrupted_run() {
    let cfg = small_config(16, 0.02);
    let dir = tempfile::tempdir().unwrap();

    let mut full = Simulation::new(&cfg).unwrap();
    for _ in 0..10 {
        full.step(1e-3).unwrap();
    }

    let mut first = Simulation::new(&cfg).unwrap();
    for _ in 0..5 {
        first.step(1e-3).unwrap();
    }
    let path = dir.path().join("mid.snap");
    write_snapshot(first.state(), &path).unwrap();
    let restored = read_snapshot(&path, &cfg.params).unwrap();
    let mut second = Simulation::from_state(&cfg, restored).unwrap();
    for _ in 0..5 {
        second.step(1e-3).unwrap();
    }

    let (a, b) = (full.state(), second.state());
    assert!((a.time - b.time).abs() < 1e-14);
    assert!(a.phi.sub(&b.phi).max_abs() <= 1e-14);
    assert!(a.u.sub(&b.u).max_norm() <= 1e-14);
    assert!(a.omega.sub(&b.omega).max_abs() <= 1e-14);
}

#[test]
fn restart_through_config() {
    let cfg = small_config(16, 0.01);
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, Some(dir.path())).unwrap();
    let snap = dir.path().join("final.snap");
    assert!(out.snapshots.contains(&snap));
    let mut resumed = cfg.clone();
    resumed.initial_condition = magg_core::simulation::InitialCondition::FromSnapshot { path: snap };
    let s = initial_state(&resumed).unwrap();
    assert_eq!(s.time, out.state.time);
    assert_eq!(s.phi.values(), out.state.phi.values());
}

#[test]
fn point_symmetry_is_preserved() {
    // φ, ω even and u odd under (x, y) → (−x, −y)
    let cfg = config(json!({
        "grid": { "n": 32, "box_length": 2.0 * PI },
        "params": {
            "sigma": 1.0, "eps": 0.5, "rho1": 1.3, "rho2": 1.0,
            "eta": [0.2, 0.1], "eta_r": [0.2, 0.1], "potential": "quartic"
        },
        "dt": 2e-3,
        "t_end": 0.2,
        "initial_condition": {
            "type": "uniform_plus_modes",
            "phi": { "modes": [
                { "kx": 1, "ky": 0, "amplitude": 0.5, "phase": 0.0 },
                { "kx": 1, "ky": 2, "amplitude": 0.2, "phase": 0.0 }
            ]},
            "stream": { "modes": [{ "kx": 1, "ky": 1, "amplitude": 0.4, "phase": 0.0 }] },
            "omega": { "modes": [{ "kx": 2, "ky": 1, "amplitude": 0.3, "phase": 0.0 }] }
        }
    }));
    let mut sim = Simulation::new(&cfg).unwrap();
    for _ in 0..100 {
        sim.step(2e-3).unwrap();
    }
    let s = sim.state();
    let n = s.grid().n();
    let mirror = |idx: usize| {
        let (i, j) = (idx % n, idx / n);
        ((n - j) % n) * n + (n - i) % n
    };
    let mut worst = 0.0_f64;
    for idx in 0..n * n {
        let m = mirror(idx);
        worst = worst.max((s.phi.values()[idx] - s.phi.values()[m]).abs());
        worst = worst.max((s.omega.values()[idx] - s.omega.values()[m]).abs());
        worst = worst.max((s.u.x.values()[idx] + s.u.x.values()[m]).abs());
        worst = worst.max((s.u.y.values()[idx] + s.u.y.values()[m]).abs());
    }
    assert!(s.u.max_norm() > 0.05);
    assert!(worst < 1e-10, "symmetry defect {worst:e}");
}

#[test]
fn failed_run_flushes_partial_outputs() {
    let mut cfg = small_config(16, 1.0);
    cfg.params.potential = magg_core::PotentialKind::Logarithmic;
    cfg.params.eps = 0.1;
    cfg.params.stabilization = Some(0.0);
    cfg.dt = 0.5;
    cfg.cfl_number = 1.0;
    let dir = tempfile::tempdir().unwrap();
    let err = run(&cfg, Some(dir.path())).unwrap_err();
    assert!(!err.is_validation());
    assert!(dir.path().join("failed.snap").exists());
    assert!(dir.path().join("ledger.csv").exists());
    assert!(dir.path().join("failure.txt").exists());
}

#[test]
fn decoupling_identity_without_rotational_viscosity() {
    let mut cfg = small_config(16, 0.05);
    cfg.params.eta_r = [0.0, 0.0];
    if let magg_core::simulation::InitialCondition::UniformPlusModes { omega, .. } =
        &mut cfg.initial_condition
    {
        *omega = Default::default();
    }
    let mut agg = cfg.clone();
    agg.params.variant = magg_core::Variant::Agg;
    let mut a = Simulation::new(&cfg).unwrap();
    let mut b = Simulation::new(&agg).unwrap();
    let mut acc = DiffAccumulator::new();
    for _ in 0..25 {
        a.step(2e-3).unwrap();
        b.step(2e-3).unwrap();
        acc.add(a.state(), b.state()).unwrap();
        assert!(a.state().omega.max_abs() == 0.0);
    }
    assert!(acc.finish().combined <= 1e-14);
}

#[test]
fn etar_sweep_rejects_zero_and_unsorted_values() {
    let cfg = small_config(16, 0.01);
    assert!(etar_sweep(&cfg, &[0.0]).unwrap_err().error.is_validation());
    assert!(etar_sweep(&cfg, &[0.01, 0.1]).unwrap_err().error.is_validation());
}

#[test]
fn etar_sweep_is_monotone_and_reproducible() {
    let cfg = small_config(16, 0.05);
    let values = [0.1, 0.03, 0.01, 0.003];
    let a = etar_sweep(&cfg, &values).unwrap();
    let b = etar_sweep(&cfg, &values).unwrap();
    assert_eq!(
        serde_json::to_string(&a).unwrap(),
        serde_json::to_string(&b).unwrap()
    );
    let inversions = a.errors.windows(2).filter(|w| w[1] > w[0]).count();
    assert!(inversions <= 1);
    assert!(a.fitted_slope.unwrap() > 0.9);
}

#[test]
fn model_h_collapse_and_ordering() {
    let mut cfg = small_config(16, 0.05);
    cfg.params.eta_r = [0.0, 0.0];
    cfg.params.rho1 = 1.2;
    cfg.params.rho2 = 1.2;
    let collapse = modelh_sweep(&cfg, &[0.0]).unwrap();
    assert!(collapse.errors[0] <= 1e-14, "{:e}", collapse.errors[0]);
    assert!(modelh_sweep(&cfg, &[0.05, 0.1]).is_err());
}

#[test]
fn energy_order_flags_equilibrium() {
    let cfg = config(json!({
        "grid": { "n": 16, "box_length": 2.0 * PI },
        "params": {
            "sigma": 1.0, "eps": 0.5, "rho1": 1.0, "rho2": 1.0,
            "eta": [0.2, 0.2], "potential": "quartic"
        },
        "dt": 1e-2,
        "t_end": 0.05,
        "initial_condition": { "type": "uniform_plus_modes", "phi": { "mean": 1.0 } }
    }));
    let report = energy_order(&cfg, &[1e-2, 5e-3]).unwrap();
    assert!(report.equilibrium);
    assert!(report.fitted_order.is_none());
    assert!(energy_order(&cfg, &[5e-3, 1e-2]).is_err());
}
