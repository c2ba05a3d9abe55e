//! Momentum and micro-rotation sub-steps.
//!
//! Both equations use a lagged-coefficient IMEX split: a constant diffusion
//! (`ν̄` for velocity, `c̄` for micro-rotation) is implicit and diagonal in
//! Fourier space, everything else, including the variable part of the
//! viscous stresses, is explicit and truncated to the dealiasing mask.
//!
//! Incompressibility is enforced by projecting `u*` with the density-weighted
//! operator `div(ρ⁻¹∇ψ) = div u*`. The operator is inverted by the fixed point
//! `a₀∇ψ ← Q(u* − (ρ⁻¹ − a₀)∇ψ)` with `a₀` the midpoint of `ρ⁻¹`, which
//! contracts at rate `(ρ_max − ρ_min)/(ρ_max + ρ_min)`. Each iterate is exactly
//! solenoidal; with `pressure_iterations = 0` the step reduces to a plain Leray
//! projection. For constant density the correction vanishes identically.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::cahn_hilliard::advective_limit;
use crate::error::{MaggError, Result};
use crate::model::{capillary_force, coeff_of_phi, ModelParams, State};
use crate::spectral::{curl1, curl2, dealiased_product, gradient_part, leray_project, Axis, Field, VecField};

/// Solver knobs shared by every step of a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowSettings {
    /// `ν̄`; defaults to `min(η₁, η₂) / ρ_max`.
    pub implicit_viscosity: Option<f64>,
    /// `c̄`; defaults to `min_i(c_d,i + c_a,i) / ρ_max`.
    pub implicit_omega_diffusion: Option<f64>,
    pub pressure_iterations: usize,
    /// Relative change in `ψ` below which the pressure iteration stops.
    pub pressure_tol: f64,
}

impl Default for FlowSettings {
    fn default() -> Self {
        FlowSettings {
            implicit_viscosity: None,
            implicit_omega_diffusion: None,
            pressure_iterations: 60,
            pressure_tol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowStepOptions {
    pub dt: f64,
    pub implicit_viscosity: f64,
    pub implicit_omega_diffusion: f64,
    pub pressure_iterations: usize,
    pub pressure_tol: f64,
}

impl FlowStepOptions {
    pub fn new(dt: f64, settings: &FlowSettings, params: &ModelParams) -> Self {
        let rho_max = params.rho_max();
        let nu = settings
            .implicit_viscosity
            .unwrap_or(params.eta[0].min(params.eta[1]) / rho_max);
        let c = settings.implicit_omega_diffusion.unwrap_or(
            (params.cd[0] + params.ca[0]).min(params.cd[1] + params.ca[1]) / rho_max,
        );
        FlowStepOptions {
            dt,
            implicit_viscosity: nu,
            implicit_omega_diffusion: c,
            pressure_iterations: settings.pressure_iterations,
            pressure_tol: settings.pressure_tol,
        }
    }
}

fn density(phi: &Field, params: &ModelParams) -> Result<Field> {
    let rho = params.rho_of_phi(phi);
    let min = rho.min();
    if !(min > 0.0) {
        return Err(MaggError::PositivityLoss {
            quantity: "density",
            min,
        });
    }
    Ok(rho)
}

/// `(a·∇) b`, truncated.
fn directional(a: &VecField, b: &Field) -> Field {
    a.x.mul(&b.derivative(Axis::X))
        .add(&a.y.mul(&b.derivative(Axis::Y)))
        .dealias()
}

/// Explicit part of the velocity tendency, already divided by `ρ`.
///
/// Evaluated on `state.phi` (the freshly updated phase field), `state.u` and
/// `state.omega`; the implicit `ν̄Δu` is subtracted so the caller can add it
/// back implicitly. Pressure is not included.
pub fn momentum_rhs_explicit(
    state: &State,
    mu: &Field,
    params: &ModelParams,
    implicit_viscosity: f64,
) -> Result<VecField> {
    let phi = &state.phi;
    let u = &state.u;
    let rho = density(phi, params)?;
    let eta = params.eta_of_phi(phi);
    let eta_r = params.eta_r_of_phi(phi);

    let dxux = u.x.derivative(Axis::X);
    let dyux = u.x.derivative(Axis::Y);
    let dxuy = u.y.derivative(Axis::X);
    let dyuy = u.y.derivative(Axis::Y);

    let conv = VecField::new(directional(u, &u.x), directional(u, &u.y));

    // T_ij = η(∂ᵢuⱼ + ∂ⱼuᵢ) + η_r(∂ᵢuⱼ − ∂ⱼuᵢ), viscous force_j = ∂ᵢT_ij
    let sym = dxuy.add(&dyux);
    let skew = dxuy.sub(&dyux);
    let t_xx = dealiased_product(&eta, &dxux.scale(2.0));
    let t_yy = dealiased_product(&eta, &dyuy.scale(2.0));
    let t_xy = eta.mul(&sym).add(&eta_r.mul(&skew)).dealias();
    let t_yx = eta.mul(&sym).sub(&eta_r.mul(&skew)).dealias();
    let viscous = VecField::new(
        t_xx.derivative(Axis::X).add(&t_yx.derivative(Axis::Y)),
        t_xy.derivative(Axis::X).add(&t_yy.derivative(Axis::Y)),
    );

    let rotation = curl1(&dealiased_product(&eta_r, &state.omega)).scale(2.0);

    let grad_mu = mu.gradient();
    let rho_prime = params.rho_prime();
    let flux = VecField::new(
        directional(&grad_mu, &u.x).scale(rho_prime),
        directional(&grad_mu, &u.y).scale(rho_prime),
    );

    let capillary = capillary_force(phi, mu);

    let force = viscous.add(&rotation).add(&flux).add(&capillary);
    let inv_rho = rho.map(|r| 1.0 / r);
    let accel = force.map_components(|f| dealiased_product(f, &inv_rho));
    let implicit = u.map_components(|c| c.laplacian().scale(implicit_viscosity));
    Ok(accel.sub(&conv).sub(&implicit))
}

/// Solves the density-weighted projection of `u_star`.
///
/// Returns the solenoidal velocity and `ψ` with `u = u* − ρ⁻¹∇ψ`, `mean(ψ) = 0`.
pub fn variable_density_projection(
    u_star: &VecField,
    rho: &Field,
    iterations: usize,
    tol: f64,
) -> (VecField, Field) {
    let grid = u_star.grid().clone();
    let inv_rho = rho.map(|r| 1.0 / r);
    let (lo, hi) = (inv_rho.min(), inv_rho.max_abs());
    let a0 = 0.5 * (lo + hi);
    let (_, q) = gradient_part(u_star);
    if iterations == 0 || lo == hi {
        return (leray_project(u_star), q.scale(1.0 / a0));
    }
    let excess = inv_rho.map(|a| a - a0);
    // (ρ⁻¹ − a₀)∇ψ, truncated, as coefficients
    let lagged = |psi: &[Complex64]| -> [Vec<Complex64>; 2] {
        [Axis::X, Axis::Y].map(|axis| {
            let d: Vec<Complex64> = psi
                .iter()
                .enumerate()
                .map(|(idx, c)| c * Complex64::new(0.0, grid.dk(idx, axis)))
                .collect();
            let product = Field::from_coeffs(&grid, d).mul(&excess);
            product.dealias().coeffs().to_vec()
        })
    };
    let (sx, sy) = (u_star.x.coeffs(), u_star.y.coeffs());
    // ψ̂ = −i k·(û* − ĉ)/(a₀|k|²)
    let solve = |corr: &[Vec<Complex64>; 2]| -> Vec<Complex64> {
        (0..grid.len())
            .map(|idx| {
                let kx = grid.dk(idx, Axis::X);
                let ky = grid.dk(idx, Axis::Y);
                let k2 = kx * kx + ky * ky;
                if k2 == 0.0 {
                    return Complex64::default();
                }
                let div = (sx[idx] - corr[0][idx]) * kx + (sy[idx] - corr[1][idx]) * ky;
                div * Complex64::new(0.0, -1.0 / (a0 * k2))
            })
            .collect()
    };
    let mut psi = q.scale(1.0 / a0).coeffs().to_vec();
    let mut corr = lagged(&psi);
    for _ in 0..iterations {
        let next = solve(&corr);
        let change = next
            .iter()
            .zip(&psi)
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).norm()));
        let size = next.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        psi = next;
        corr = lagged(&psi);
        if change <= tol * size.max(f64::MIN_POSITIVE) {
            break;
        }
    }
    let corrected = VecField::new(
        u_star.x.sub(&Field::from_coeffs(&grid, corr[0].clone())),
        u_star.y.sub(&Field::from_coeffs(&grid, corr[1].clone())),
    );
    (leray_project(&corrected), Field::from_coeffs(&grid, psi))
}

/// Advances the velocity; returns `(uⁿ⁺¹, pⁿ⁺¹)`.
pub fn momentum_step(
    state: &State,
    mu: &Field,
    opts: &FlowStepOptions,
    params: &ModelParams,
) -> Result<(VecField, Field)> {
    let dt = opts.dt;
    let limit = advective_limit(&state.u);
    if dt > limit {
        return Err(MaggError::CflViolation { dt, limit });
    }
    let grid = state.grid().clone();
    let g = momentum_rhs_explicit(state, mu, params, opts.implicit_viscosity)?;
    let nu = opts.implicit_viscosity;
    let implicit_solve = |u: &Field, g: &Field| -> Field {
        let (cu, cg) = (u.coeffs(), g.coeffs());
        let coeffs = (0..grid.len())
            .map(|idx| (cu[idx] + cg[idx] * dt) / (1.0 + dt * nu * grid.k2(idx)))
            .collect::<Vec<Complex64>>();
        Field::from_coeffs(&grid, coeffs)
    };
    let u_star = VecField::new(
        implicit_solve(&state.u.x, &g.x),
        implicit_solve(&state.u.y, &g.y),
    );
    let rho = density(&state.phi, params)?;
    let (u_next, psi) =
        variable_density_projection(&u_star, &rho, opts.pressure_iterations, opts.pressure_tol);
    if !u_next.is_finite() {
        return Err(MaggError::NonFinite("velocity"));
    }
    Ok((u_next, psi.scale(1.0 / dt)))
}

/// Advances the micro-rotation with the already updated velocity `u_next`.
///
/// Stage one treats `c̄Δω` implicitly, stage two applies the relaxation
/// `−4η_r ω/ρ` pointwise implicitly.
pub fn microrotation_step(
    state: &State,
    u_next: &VecField,
    mu: &Field,
    opts: &FlowStepOptions,
    params: &ModelParams,
) -> Result<Field> {
    let dt = opts.dt;
    let grid = state.grid().clone();
    let phi = &state.phi;
    let omega = &state.omega;
    let rho = density(phi, params)?;
    let eta_r = params.eta_r_of_phi(phi);
    let diffusivity = params.omega_diffusivity_of_phi(phi);

    let gw = omega.gradient();
    let diffusion = dealiased_product(&diffusivity, &gw.x)
        .derivative(Axis::X)
        .add(&dealiased_product(&diffusivity, &gw.y).derivative(Axis::Y));
    let coupling = dealiased_product(&eta_r, &curl2(u_next)).scale(2.0);
    let flux = directional(&mu.gradient(), omega).scale(params.rho_prime());
    let advection = directional(u_next, omega);

    let inv_rho = rho.map(|r| 1.0 / r);
    let c = opts.implicit_omega_diffusion;
    let h = dealiased_product(&diffusion.add(&coupling).add(&flux), &inv_rho)
        .sub(&advection)
        .sub(&omega.laplacian().scale(c));

    let (cw, ch) = (omega.coeffs(), h.coeffs());
    let star = (0..grid.len())
        .map(|idx| (cw[idx] + ch[idx] * dt) / (1.0 + dt * c * grid.k2(idx)))
        .collect::<Vec<Complex64>>();
    let star = Field::from_coeffs(&grid, star);

    let relax = coeff_of_phi(params.eta_r_effective(), phi)
        .zip_map(&rho, |er, r| 1.0 / (1.0 + 4.0 * dt * er / r));
    let next = star.mul(&relax).dealias();
    next.ensure_finite("micro-rotation")?;
    Ok(next)
}
