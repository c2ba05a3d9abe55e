//! Convective Cahn–Hilliard sub-step and the preparation of initial phase data.
//!
//! The step is linearly implicit: the surface-energy term is implicit, the
//! potential derivative explicit, and a linear stabilization `S (φⁿ⁺¹ − φⁿ)`
//! plus the optional viscous term `α ∂ₜφ` are added to `μ`. Every mode
//! decouples, so one diagonal solve per step suffices:
//!
//! ```text
//! (φⁿ⁺¹ − φⁿ)/Δt + P(uⁿ·∇φⁿ) = Δμ*
//! μ* = −σε Δφⁿ⁺¹ + (σ/ε) F'(φⁿ) + S (φⁿ⁺¹ − φⁿ) + α (φⁿ⁺¹ − φⁿ)/Δt
//! ```

use num_complex::Complex64;

use crate::error::{MaggError, Result};
use crate::krylov::gmres;
use crate::model::{ModelParams, PotentialKind};
use crate::spectral::{Axis, Field, VecField};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChStepOptions {
    pub dt: f64,
    pub alpha: f64,
    pub stabilization: f64,
}

impl ChStepOptions {
    /// Options with `α` and `S` taken from the model parameters.
    pub fn from_params(dt: f64, params: &ModelParams) -> Self {
        ChStepOptions {
            dt,
            alpha: params.alpha,
            stabilization: params.stabilization(),
        }
    }
}

/// Advective time-step limit `h / max|u|` (infinite for a fluid at rest).
pub fn advective_limit(u: &VecField) -> f64 {
    let vmax = u.max_norm();
    if vmax == 0.0 {
        f64::INFINITY
    } else {
        u.grid().spacing() / vmax
    }
}

/// Advances the phase field by one step; returns `(φⁿ⁺¹, μ*)`.
pub fn ch_step(
    phi: &Field,
    u: &VecField,
    opts: &ChStepOptions,
    params: &ModelParams,
) -> Result<(Field, Field)> {
    let dt = opts.dt;
    if !(dt > 0.0) || opts.stabilization < 0.0 || opts.alpha < 0.0 {
        return Err(MaggError::validation("dt", "CH step needs dt > 0, S >= 0, alpha >= 0"));
    }
    let limit = advective_limit(u);
    if dt > limit {
        return Err(MaggError::CflViolation { dt, limit });
    }
    let grid = phi.grid().clone();
    let advect = u
        .x
        .mul(&phi.derivative(Axis::X))
        .add(&u.y.mul(&phi.derivative(Axis::Y)))
        .dealias();
    let so = params.sigma / params.eps;
    let fprime = params.potential().deriv_field(phi)?.scale(so).dealias();

    let se = params.sigma * params.eps;
    let (s, alpha) = (opts.stabilization, opts.alpha);
    let (c_phi, c_adv, c_f) = (phi.coeffs(), advect.coeffs(), fprime.coeffs());
    let mut next = vec![Complex64::default(); grid.len()];
    let mut mu = vec![Complex64::default(); grid.len()];
    for idx in 0..grid.len() {
        let k2 = grid.k2(idx);
        let adv = if idx == 0 { Complex64::default() } else { c_adv[idx] };
        let lag = 1.0 + dt * s * k2 + alpha * k2;
        let den = lag + dt * se * k2 * k2;
        let new = (c_phi[idx] * lag - adv * dt - c_f[idx] * (dt * k2)) / den;
        next[idx] = new;
        let incr = new - c_phi[idx];
        mu[idx] = new * (se * k2) + c_f[idx] + incr * (s + alpha / dt);
    }
    let phi_next = Field::from_coeffs(&grid, next);
    let mu_next = Field::from_coeffs(&grid, mu);
    phi_next.ensure_finite("phase field")?;
    if params.potential == PotentialKind::Logarithmic {
        // reports the offending sample
        params.potential().deriv_field(&phi_next)?;
    }
    Ok((phi_next, mu_next))
}

/// Pointwise clamp to `[−k, k]`.
pub fn truncate_mu(mu: &Field, k_level: f64) -> Field {
    mu.map(|z| z.clamp(-k_level, k_level))
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MollifierReport {
    pub k_level: f64,
    pub iterations: usize,
    pub residual: f64,
    /// `1 − max|φ₀,ₖ|`.
    pub separation: f64,
    /// `|mean(φ₀,ₖ) − mean(φ₀)|`; the periodic problem lets the mean move.
    pub mean_drift: f64,
}

pub const MOLLIFIER_TOL: f64 = 1e-10;
pub const MOLLIFIER_MAX_ITER: usize = 200;

/// `−Δφ + F'(φ) − target`, evaluated by collocation.
fn mollifier_residual(phi: &Field, target: &Field, params: &ModelParams) -> Result<Field> {
    let fprime = params.potential().deriv_field(phi)?;
    Ok(phi.laplacian().scale(-1.0).add(&fprime).sub(target))
}

/// Solves `−Δφ₀,ₖ + F'(φ₀,ₖ) = h_k(−Δφ₀ + F'(φ₀))` on the torus by damped Newton.
pub fn mollify_initial_phi(
    phi0: &Field,
    k_level: f64,
    params: &ModelParams,
) -> Result<(Field, MollifierReport)> {
    if !(k_level > 0.0) {
        return Err(MaggError::validation("k", "truncation level must be positive"));
    }
    let grid = phi0.grid().clone();
    let pot = params.potential();
    let mu0 = mollifier_residual(phi0, &Field::zeros(&grid), params)?;
    let target = truncate_mu(&mu0, k_level);

    let mut phi = phi0.clone();
    let mut res = mollifier_residual(&phi, &target, params)?;
    let mut res_norm = res.max_abs();
    let mut iterations = 0;
    let mut newton = true;

    while res_norm > MOLLIFIER_TOL {
        if iterations >= MOLLIFIER_MAX_ITER {
            return Err(MaggError::NonConvergence {
                iterations,
                residual: res_norm,
            });
        }
        iterations += 1;
        let second = pot.second_field(&phi)?;
        let shift = (second.min() + params.theta0).max(1.0);
        let precond = |v: &[f64]| -> Vec<f64> {
            Field::from_values(&grid, v.to_vec())
                .inverse_helmholtz(shift, 1.0, 1)
                .expect("shift is positive")
                .into_values()
        };
        let step = if newton {
            let apply = |v: &[f64]| -> Vec<f64> {
                let f = Field::from_values(&grid, v.to_vec());
                f.laplacian()
                    .scale(-1.0)
                    .add(&f.mul(&second))
                    .into_values()
            };
            let rhs: Vec<f64> = res.values().iter().map(|r| -r).collect();
            let out = gmres(apply, precond, &rhs, 40, 20, 1e-12);
            if !out.converged {
                newton = false;
                continue;
            }
            Field::from_values(&grid, out.solution)
        } else {
            // preconditioned Picard step
            let upper = second.max_abs().max(1.0);
            Field::from_values(&grid, precond(res.values())).scale(-shift / (upper + shift))
        };

        let mut lambda = 1.0;
        let mut accepted = None;
        while lambda >= 1.0 / 1024.0 {
            let trial = phi.add(&step.scale(lambda));
            match mollifier_residual(&trial, &target, params) {
                Ok(r) if r.max_abs() < res_norm => {
                    accepted = Some((trial, r));
                    break;
                }
                Ok(_) | Err(MaggError::SeparationViolation { .. }) => lambda *= 0.5,
                Err(e) => return Err(e),
            }
        }
        match accepted {
            Some((trial, r)) => {
                phi = trial;
                res_norm = r.max_abs();
                res = r;
            }
            None if newton => newton = false,
            None => {
                return Err(MaggError::NonConvergence {
                    iterations,
                    residual: res_norm,
                })
            }
        }
    }

    let report = MollifierReport {
        k_level,
        iterations,
        residual: res_norm,
        separation: 1.0 - phi.max_abs(),
        mean_drift: (phi.mean() - phi0.mean()).abs(),
    };
    Ok((phi, report))
}
