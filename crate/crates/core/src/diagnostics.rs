//! Difference norms between trajectories, parameter sweeps against the
//! nonpolar reductions, energy-law order measurement and spatial
//! self-convergence.
//!
//! The sup in time is taken over every step of the reference trajectory.
//! All runs of a sweep replay the time-step schedule of the reference run, so
//! differences measure the model change only.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{MaggError, Result};
use crate::model::{State, Variant};
use crate::simulation::{cfl_dt, coupled_step, initial_state, SimConfig, Simulation};
use crate::spectral::{Field, SpectralGrid};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DiffReport {
    pub sup_u_l2_sq: f64,
    /// Sup of `‖ω_a − ω_b‖²`; equals `‖ω_w‖²` when the reference has `ω ≡ 0`.
    pub sup_omega_l2_sq: f64,
    pub sup_phi_h2_sq: f64,
    pub combined: f64,
    pub sample_times: Vec<f64>,
}

/// Running sup of the three squared difference norms.
#[derive(Debug, Clone, Default)]
pub struct DiffAccumulator {
    grid: Option<Arc<SpectralGrid>>,
    report: DiffReport,
}

impl DiffAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, a: &State, b: &State) -> Result<()> {
        if **a.grid() != **b.grid() {
            return Err(MaggError::GridMismatch);
        }
        match &self.grid {
            Some(g) if **g != **a.grid() => return Err(MaggError::GridMismatch),
            Some(_) => {}
            None => self.grid = Some(a.grid().clone()),
        }
        let du = a.u.sub(&b.u).l2_norm_sq();
        let dw = a.omega.sub(&b.omega).sobolev_norm_sq(0);
        let dp = a.phi.sub(&b.phi).sobolev_norm_sq(2);
        let r = &mut self.report;
        r.sup_u_l2_sq = r.sup_u_l2_sq.max(du);
        r.sup_omega_l2_sq = r.sup_omega_l2_sq.max(dw);
        r.sup_phi_h2_sq = r.sup_phi_h2_sq.max(dp);
        r.sample_times.push(a.time);
        Ok(())
    }

    pub fn finish(mut self) -> DiffReport {
        let r = &mut self.report;
        r.combined = r.sup_u_l2_sq + r.sup_omega_l2_sq + r.sup_phi_h2_sq;
        self.report
    }
}

/// Squared difference norms at a single time.
pub fn difference_norms(a: &State, b: &State) -> Result<DiffReport> {
    let mut acc = DiffAccumulator::new();
    acc.add(a, b)?;
    Ok(acc.finish())
}

/// Ordinary least squares of `log y` against `log x`; returns `(slope, R²)`.
///
/// Points with a non-positive or non-finite coordinate are skipped. `None`
/// when fewer than two distinct abscissae remain.
pub fn fit_loglog(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = x
        .iter()
        .zip(y)
        .filter(|(a, b)| **a > 0.0 && **b > 0.0 && a.is_finite() && b.is_finite())
        .map(|(a, b)| (a.ln(), b.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let ss_res: f64 = pts
        .iter()
        .map(|p| (p.1 - my - slope * (p.0 - mx)).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Some((slope, r2))
}

/// Hex SHA-256 of the canonical JSON form of a config.
pub fn config_digest(config: &SimConfig) -> String {
    let text = serde_json::to_string(config).expect("config serializes");
    hex::encode(Sha256::digest(text.as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub parameter_values: Vec<f64>,
    pub errors: Vec<f64>,
    pub fitted_slope: Option<f64>,
    pub fit_r2: Option<f64>,
    pub config_digest: String,
}

/// A sweep that stopped early; `partial` holds the values finished before
/// the first failing one.
#[derive(Debug)]
pub struct SweepFailure {
    pub partial: SweepReport,
    pub error: MaggError,
}

impl std::fmt::Display for SweepFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "sweep stopped after {} of its values: {}",
            self.partial.parameter_values.len(),
            self.error
        )
    }
}

impl std::error::Error for SweepFailure {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.error)
    }
}

impl From<MaggError> for Box<SweepFailure> {
    fn from(error: MaggError) -> Self {
        Box::new(SweepFailure {
            partial: SweepReport {
                parameter_values: Vec::new(),
                errors: Vec::new(),
                fitted_slope: None,
                fit_r2: None,
                config_digest: String::new(),
            },
            error,
        })
    }
}

pub type SweepResult = std::result::Result<SweepReport, Box<SweepFailure>>;

fn check_decreasing(name: &str, values: &[f64], allow_zero: bool) -> Result<()> {
    if values.is_empty() {
        return Err(MaggError::validation(name, "needs at least one value"));
    }
    for &v in values {
        let ok = v.is_finite() && (v > 0.0 || (allow_zero && v == 0.0));
        if !ok {
            let bound = if allow_zero { "non-negative" } else { "positive" };
            return Err(MaggError::validation(name, format!("{v} is not {bound}")));
        }
    }
    if values.windows(2).any(|w| w[1] >= w[0]) {
        return Err(MaggError::validation(name, "must be strictly decreasing"));
    }
    Ok(())
}

/// Reference trajectory: every state after the initial one plus the steps taken.
struct Reference {
    initial: State,
    dts: Vec<f64>,
    states: Vec<State>,
}

fn reference_run(config: &SimConfig, initial: State) -> Result<Reference> {
    let grid = initial.grid().clone();
    let mut dts = Vec::new();
    let mut states: Vec<State> = Vec::new();
    let mut current = initial.clone();
    while config.t_end - current.time > 1e-9 * config.dt {
        let dt = cfl_dt(&current, config.cfl_number, &grid, config.dt).min(config.t_end - current.time);
        current = coupled_step(&current, dt, &config.flow, &config.params)?;
        dts.push(dt);
        states.push(current.clone());
    }
    Ok(Reference {
        initial,
        dts,
        states,
    })
}

/// Replays the reference schedule under `config` and accumulates differences.
fn replay(config: &SimConfig, reference: &Reference) -> Result<DiffReport> {
    let mut acc = DiffAccumulator::new();
    let mut current = State::new(
        0.0,
        reference.initial.u.clone(),
        reference.initial.omega.clone(),
        reference.initial.phi.clone(),
        &config.params,
    )?
    .canonical();
    acc.add(&current, &reference.initial)?;
    for (dt, target) in reference.dts.iter().zip(&reference.states) {
        current = coupled_step(&current, *dt, &config.flow, &config.params)?;
        acc.add(&current, target)?;
    }
    Ok(acc.finish())
}

fn assemble(
    base: &SimConfig,
    xs: &[f64],
    fit_x: impl Fn(f64) -> f64,
    results: Vec<Result<DiffReport>>,
) -> SweepResult {
    let digest = config_digest(base);
    let mut report = SweepReport {
        parameter_values: Vec::new(),
        errors: Vec::new(),
        fitted_slope: None,
        fit_r2: None,
        config_digest: digest,
    };
    let mut failure = None;
    for (&x, r) in xs.iter().zip(results) {
        match r {
            Ok(d) => {
                report.parameter_values.push(x);
                report.errors.push(d.combined);
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    let abscissae: Vec<f64> = report.parameter_values.iter().map(|&v| fit_x(v)).collect();
    if let Some((slope, r2)) = fit_loglog(&abscissae, &report.errors) {
        report.fitted_slope = Some(slope);
        report.fit_r2 = Some(r2);
    }
    match failure {
        None => Ok(report),
        Some(error) => Err(Box::new(SweepFailure {
            partial: report,
            error,
        })),
    }
}

/// Initial state with the micro-rotation forced to zero.
fn nonpolar_initial(config: &SimConfig) -> Result<State> {
    let s = initial_state(config)?;
    State::new(0.0, s.u, Field::zeros(s.phi.grid()), s.phi, &config.params).map(State::canonical)
}

/// Micropolar runs with constant `η_r ∈ values` against the nonpolar
/// reference, all from `(u⁰, 0, φ⁰)`.
pub fn etar_sweep(base: &SimConfig, values: &[f64]) -> SweepResult {
    check_decreasing("etar values", values, false)?;
    base.validate()?;
    let mut reference_cfg = base.clone();
    reference_cfg.params.variant = Variant::Agg;
    let initial = nonpolar_initial(&reference_cfg)?;
    let reference = reference_run(&reference_cfg, initial)?;
    let results: Vec<Result<DiffReport>> = values
        .par_iter()
        .map(|&v| {
            let mut cfg = base.clone();
            cfg.params.variant = Variant::Magg;
            cfg.params.eta_r = [v, v];
            cfg.params.validate()?;
            replay(&cfg, &reference)
        })
        .collect();
    assemble(base, values, |v| v, results)
}

/// Micropolar runs with densities `ρ̄ ± Δρ/2` against Model H with density
/// `ρ̄ = (ρ₁ + ρ₂)/2`; the fit abscissa is `η_r + Δρ`.
pub fn modelh_sweep(base: &SimConfig, mismatch: &[f64]) -> SweepResult {
    check_decreasing("mismatch values", mismatch, true)?;
    base.validate()?;
    let p = &base.params;
    if p.eta_r[0] != p.eta_r[1] {
        return Err(MaggError::validation("params.eta_r", "must be constant for the comparison").into());
    }
    let eta_r = p.eta_r[0];
    let rho_bar = 0.5 * (p.rho1 + p.rho2);
    let mut reference_cfg = base.clone();
    reference_cfg.params.variant = Variant::ModelH { rho_bar };
    let initial = nonpolar_initial(&reference_cfg)?;
    let reference = reference_run(&reference_cfg, initial)?;
    let results: Vec<Result<DiffReport>> = mismatch
        .par_iter()
        .map(|&d| {
            let mut cfg = base.clone();
            cfg.params.variant = Variant::Magg;
            cfg.params.rho1 = rho_bar + 0.5 * d;
            cfg.params.rho2 = rho_bar - 0.5 * d;
            cfg.params.validate()?;
            replay(&cfg, &reference)
        })
        .collect();
    assemble(base, mismatch, |d| eta_r + d, results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyOrderReport {
    pub dt_values: Vec<f64>,
    pub max_residuals: Vec<f64>,
    /// `max_residual[i] / max_residual[i + 1]`.
    pub ratios: Vec<f64>,
    pub fitted_order: Option<f64>,
    pub fit_r2: Option<f64>,
    /// Residuals sit at roundoff; no order is fitted.
    pub equilibrium: bool,
}

/// Residual level, relative to the initial energy, treated as roundoff.
pub const EQUILIBRIUM_RESIDUAL: f64 = 1e-10;

/// Runs the base config with each fixed step size and measures how the
/// largest energy-law residual scales with `dt`.
pub fn energy_order(base: &SimConfig, dt_values: &[f64]) -> Result<EnergyOrderReport> {
    check_decreasing("dt values", dt_values, false)?;
    base.validate()?;
    let runs: Vec<Result<(f64, f64)>> = dt_values
        .par_iter()
        .map(|&dt| {
            let mut cfg = base.clone();
            cfg.dt = dt;
            let mut sim = Simulation::new(&cfg)?;
            let e0 = sim.ledger().rows[0].energy.total;
            sim.advance_to(cfg.t_end, true)?;
            Ok((sim.ledger().max_abs_residual(), e0))
        })
        .collect();
    let mut max_residuals = Vec::with_capacity(runs.len());
    let mut scale = 0.0_f64;
    for r in runs {
        let (res, e0) = r?;
        max_residuals.push(res);
        scale = scale.max(e0.abs());
    }
    let ratios = max_residuals.windows(2).map(|w| w[0] / w[1]).collect();
    let equilibrium = max_residuals
        .iter()
        .all(|&r| r <= EQUILIBRIUM_RESIDUAL * scale.max(1.0));
    let fit = if equilibrium {
        None
    } else {
        fit_loglog(dt_values, &max_residuals)
    };
    Ok(EnergyOrderReport {
        dt_values: dt_values.to_vec(),
        max_residuals,
        ratios,
        fitted_order: fit.map(|f| f.0),
        fit_r2: fit.map(|f| f.1),
        equilibrium,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub grids: Vec<usize>,
    /// Sup-norm distance of `(φ, u, ω)` at `t_end` from the finest grid,
    /// one entry per coarser grid.
    pub errors: Vec<f64>,
}

/// Runs the base config on each grid with the same fixed step size and
/// compares every coarser solution with the finest one.
pub fn convergence(base: &SimConfig, grids: &[usize]) -> Result<ConvergenceReport> {
    if grids.len() < 2 {
        return Err(MaggError::validation("grids", "needs at least two grid sizes"));
    }
    if grids.windows(2).any(|w| w[1] <= w[0]) {
        return Err(MaggError::validation("grids", "must be strictly increasing"));
    }
    base.validate()?;
    let finals: Vec<Result<State>> = grids
        .par_iter()
        .map(|&n| {
            let mut cfg = base.clone();
            cfg.grid.n = n;
            let mut sim = Simulation::new(&cfg)?;
            sim.advance_to(cfg.t_end, true)?;
            Ok(sim.into_parts().0)
        })
        .collect();
    let finals = finals.into_iter().collect::<Result<Vec<_>>>()?;
    let (fine, coarse) = finals.split_last().expect("at least two grids");
    let target = fine.grid();
    let errors = coarse
        .iter()
        .map(|s| -> Result<f64> {
            let phi = s.phi.resample(target)?.sub(&fine.phi).max_abs();
            let u = s.u.resample(target)?.sub(&fine.u).max_norm();
            let w = s.omega.resample(target)?.sub(&fine.omega).max_abs();
            Ok(phi.max(u).max(w))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(ConvergenceReport {
        grids: grids.to_vec(),
        errors,
    })
}
