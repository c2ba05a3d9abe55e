//! Fixtures shared by the solver benchmarks.

use std::f64::consts::PI;

use magg_core::{make_grid, Field, ModelParams, PotentialKind, State, VecField};

pub fn demo_params() -> ModelParams {
    ModelParams {
        sigma: 1.0,
        eps: 0.4,
        rho1: 1.5,
        rho2: 1.0,
        eta: [0.1, 0.1],
        eta_r: [0.05, 0.05],
        potential: PotentialKind::Quartic,
        ..ModelParams::default()
    }
}

/// A smooth, nontrivial state on an `n × n` grid of the `2π` box.
pub fn demo_state(n: usize, params: &ModelParams) -> State {
    let g = make_grid(n, 2.0 * PI).expect("valid grid");
    let phi = Field::from_fn(&g, |x, y| 0.6 * x.cos() + 0.2 * (x + 2.0 * y).sin()).dealias();
    let u = VecField::new(
        Field::from_fn(&g, |x, y| 0.3 * x.sin() * y.cos()),
        Field::from_fn(&g, |x, y| -0.3 * x.cos() * y.sin()),
    );
    let omega = Field::from_fn(&g, |x, y| 0.1 * (x - y).cos());
    State::new(0.0, u, omega, phi, params)
        .expect("valid state")
        .canonical()
}
