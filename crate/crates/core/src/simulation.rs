//! Run configuration, the coupled time loop and the per-step energy ledger.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cahn_hilliard::{ch_step, ChStepOptions};
use crate::error::{MaggError, Result};
use crate::hydrodynamics::{microrotation_step, momentum_step, FlowSettings, FlowStepOptions};
use crate::io;
use crate::model::{dissipation, total_energy, DissipationBreakdown, EnergyBreakdown, ModelParams, PotentialKind, State};
use crate::spectral::{curl1, DealiasRule, Field, SpectralGrid};

/// Floor on the velocity scale used by the CFL rule.
pub const VELOCITY_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n: usize,
    pub box_length: f64,
    #[serde(default)]
    pub dealias: DealiasRule,
}

impl GridConfig {
    pub fn build(&self) -> Result<Arc<SpectralGrid>> {
        SpectralGrid::new(self.n, self.box_length, self.dealias)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Ledger rows are kept every `ledger_every` steps (the last step is always kept).
    #[serde(default = "one")]
    pub ledger_every: usize,
    /// Snapshot cadence in steps; 0 writes only the final snapshot.
    #[serde(default)]
    pub snapshot_every: usize,
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

fn one() -> usize {
    1
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            ledger_every: 1,
            snapshot_every: 0,
            dir: None,
        }
    }
}

/// One Fourier mode `amplitude · cos(2π(kx x + ky y)/L + phase)`.
///
/// A missing phase is drawn from the run's seeded generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Mode {
    pub kx: i64,
    pub ky: i64,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSet {
    #[serde(default)]
    pub mean: f64,
    #[serde(default)]
    pub modes: Vec<Mode>,
}

impl ModeSet {
    fn is_trivial(&self) -> bool {
        self.mean == 0.0 && self.modes.is_empty()
    }

    fn sample(&self, grid: &Arc<SpectralGrid>, rng: &mut ChaCha8Rng) -> Field {
        let dk = 2.0 * PI / grid.box_length();
        let resolved: Vec<(f64, f64, f64, f64)> = self
            .modes
            .iter()
            .map(|m| {
                let phase = m.phase.unwrap_or_else(|| rng.random_range(0.0..2.0 * PI));
                (m.kx as f64 * dk, m.ky as f64 * dk, m.amplitude, phase)
            })
            .collect();
        let mean = self.mean;
        Field::from_fn(grid, |x, y| {
            mean + resolved
                .iter()
                .map(|&(kx, ky, a, ph)| a * (kx * x + ky * y + ph).cos())
                .sum::<f64>()
        })
    }
}

/// Initial data. Velocities come from a stream function `ψ` via
/// `u = (∂_y ψ, −∂ₓψ)`, so they are solenoidal by construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    UniformPlusModes {
        #[serde(default)]
        phi: ModeSet,
        #[serde(default)]
        stream: ModeSet,
        #[serde(default)]
        omega: ModeSet,
    },
    /// Two periodic interfaces normal to `x`:
    /// `φ = amplitude · tanh((L/2π) cos(2πx/L) / (√2 width))`.
    TanhStripe {
        width: f64,
        #[serde(default = "unit_amplitude")]
        amplitude: f64,
        #[serde(default)]
        stream: ModeSet,
        #[serde(default)]
        omega: ModeSet,
    },
    FromSnapshot {
        path: PathBuf,
    },
}

impl Default for InitialCondition {
    /// `φ ≡ 0`, fluid at rest.
    fn default() -> Self {
        InitialCondition::UniformPlusModes {
            phi: ModeSet::default(),
            stream: ModeSet::default(),
            omega: ModeSet::default(),
        }
    }
}

fn unit_amplitude() -> f64 {
    1.0
}

fn default_cfl() -> f64 {
    0.4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub grid: GridConfig,
    pub params: ModelParams,
    /// Step size cap; the CFL rule can only shrink it.
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_cfl")]
    pub cfl_number: f64,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub initial_condition: InitialCondition,
    #[serde(default)]
    pub flow: FlowSettings,
}

impl SimConfig {
    /// Checks every invariant; returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.grid.build()?;
        let warnings = self.params.validate()?;
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(MaggError::validation("dt", "must be positive"));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(MaggError::validation("t_end", "must be non-negative"));
        }
        if !(self.cfl_number > 0.0 && self.cfl_number <= 1.0) {
            return Err(MaggError::validation("cfl_number", "must lie in (0, 1]"));
        }
        if self.output.ledger_every == 0 {
            return Err(MaggError::validation("output.ledger_every", "must be at least 1"));
        }
        if let InitialCondition::TanhStripe { width, .. } = self.initial_condition {
            if !(width > 0.0) {
                return Err(MaggError::validation("initial_condition.width", "must be positive"));
            }
        }
        if let Some(v) = self.flow.implicit_viscosity {
            if !(v >= 0.0) {
                return Err(MaggError::validation("flow.implicit_viscosity", "must be non-negative"));
            }
        }
        if let Some(v) = self.flow.implicit_omega_diffusion {
            if !(v >= 0.0) {
                return Err(MaggError::validation(
                    "flow.implicit_omega_diffusion",
                    "must be non-negative",
                ));
            }
        }
        Ok(warnings)
    }
}

/// Builds the initial state on the configured grid.
pub fn initial_state(config: &SimConfig) -> Result<State> {
    let grid = config.grid.build()?;
    let params = &config.params;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (phi, stream, omega) = match &config.initial_condition {
        InitialCondition::UniformPlusModes { phi, stream, omega } => (
            phi.sample(&grid, &mut rng),
            stream.sample(&grid, &mut rng),
            omega.sample(&grid, &mut rng),
        ),
        InitialCondition::TanhStripe {
            width,
            amplitude,
            stream,
            omega,
        } => {
            let l = grid.box_length();
            let scale = l / (2.0 * PI) / (2f64.sqrt() * width);
            let phi = Field::from_fn(&grid, |x, _| {
                amplitude * (scale * (2.0 * PI * x / l).cos()).tanh()
            });
            (phi, stream.sample(&grid, &mut rng), omega.sample(&grid, &mut rng))
        }
        InitialCondition::FromSnapshot { path } => {
            let state = io::read_snapshot_with_rule(path, params, config.grid.dealias)?;
            if **state.grid() != *grid {
                return Err(MaggError::validation(
                    "initial_condition.path",
                    "snapshot grid does not match the configured grid",
                ));
            }
            return Ok(state);
        }
    };
    let phi = phi.dealias();
    let u = if let InitialCondition::UniformPlusModes { stream: s, .. }
    | InitialCondition::TanhStripe { stream: s, .. } = &config.initial_condition
    {
        if s.is_trivial() {
            crate::spectral::VecField::zeros(&grid)
        } else {
            curl1(&stream).dealias()
        }
    } else {
        unreachable!()
    };
    let omega = omega.dealias();
    if params.potential == PotentialKind::Logarithmic && phi.max_abs() >= 1.0 {
        return Err(MaggError::validation(
            "initial_condition",
            format!("logarithmic potential needs max|phi| < 1, got {}", phi.max_abs()),
        ));
    }
    params.check_positivity(&phi)?;
    State::new(0.0, u, omega, phi, params).map(State::canonical)
}

/// Advective step size `C h / max(max|u|, v_floor)`, capped at `dt_cap`.
pub fn cfl_dt(state: &State, cfl_number: f64, grid: &SpectralGrid, dt_cap: f64) -> f64 {
    let vmax = state.u.max_norm().max(VELOCITY_FLOOR);
    (cfl_number * grid.spacing() / vmax).min(dt_cap)
}

/// One step of the splitting: phase field, then velocity, then micro-rotation.
pub fn coupled_step(
    state: &State,
    dt: f64,
    settings: &FlowSettings,
    params: &ModelParams,
) -> Result<State> {
    let ch_opts = ChStepOptions::from_params(dt, params);
    let (phi, mu) = ch_step(&state.phi, &state.u, &ch_opts, params)?;
    params.check_positivity(&phi)?;
    let mid = State {
        time: state.time,
        u: state.u.clone(),
        omega: state.omega.clone(),
        phi,
        mu,
        p: state.p.clone(),
    };
    let flow_opts = FlowStepOptions::new(dt, settings, params);
    let (u, p) = momentum_step(&mid, &mid.mu, &flow_opts, params)?;
    let omega = microrotation_step(&mid, &u, &mid.mu, &flow_opts, params)?;
    Ok(State {
        time: state.time + dt,
        u,
        omega,
        phi: mid.phi,
        mu: mid.mu,
        p,
    }
    .canonical())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub t: f64,
    pub energy: EnergyBreakdown,
    pub dissipation: DissipationBreakdown,
    /// `mean(φ) · L²`.
    pub mass: f64,
    /// `1 − max|φ|`.
    pub separation: f64,
    pub max_u: f64,
    /// `max|div u|`.
    pub div_residual: f64,
    /// `(Eⁿ⁺¹ − Eⁿ)/Δt + Dⁿ⁺¹`; zero on the initial row.
    pub energy_residual: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EnergyLedger {
    pub rows: Vec<LedgerRow>,
    /// Diagnostic of the step that aborted the run, if any.
    pub failure: Option<String>,
}

impl EnergyLedger {
    pub fn push(&mut self, row: LedgerRow) {
        if let Some(last) = self.rows.last() {
            assert!(row.t > last.t, "ledger times must increase");
        }
        self.rows.push(row);
    }

    pub fn max_abs_residual(&self) -> f64 {
        self.rows
            .iter()
            .skip(1)
            .fold(0.0_f64, |m, r| m.max(r.energy_residual.abs()))
    }

    pub fn min_separation(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.separation)
            .fold(f64::INFINITY, f64::min)
    }
}

fn ledger_row(state: &State, energy: EnergyBreakdown, params: &ModelParams, residual: f64) -> LedgerRow {
    LedgerRow {
        t: state.time,
        energy,
        dissipation: dissipation(state, params),
        mass: state.phi.mean() * state.grid().area(),
        separation: state.separation_margin(),
        max_u: state.u.max_norm(),
        div_residual: state.u.divergence().max_abs(),
        energy_residual: residual,
    }
}

/// A run in progress: current state plus its ledger.
#[derive(Debug, Clone)]
pub struct Simulation {
    params: ModelParams,
    settings: FlowSettings,
    cfl_number: f64,
    dt_cap: f64,
    ledger_every: usize,
    grid: Arc<SpectralGrid>,
    state: State,
    energy: EnergyBreakdown,
    ledger: EnergyLedger,
    steps: usize,
    pending: Option<LedgerRow>,
}

impl Simulation {
    pub fn new(config: &SimConfig) -> Result<Self> {
        config.validate()?;
        let state = initial_state(config)?;
        Self::from_state(config, state)
    }

    /// Starts from an explicit state, e.g. one read back from a snapshot.
    pub fn from_state(config: &SimConfig, state: State) -> Result<Self> {
        let params = config.params.clone();
        let energy = total_energy(&state, &params)?;
        let mut ledger = EnergyLedger::default();
        ledger.push(ledger_row(&state, energy, &params, 0.0));
        Ok(Simulation {
            params,
            settings: config.flow,
            cfl_number: config.cfl_number,
            dt_cap: config.dt,
            ledger_every: config.output.ledger_every,
            grid: state.grid().clone(),
            state,
            energy,
            ledger,
            steps: 0,
            pending: None,
        })
    }

    pub fn state(&self) -> &State {
        &self.state
    }

    pub fn into_parts(mut self) -> (State, EnergyLedger) {
        self.flush_pending();
        (self.state, self.ledger)
    }

    pub fn ledger(&self) -> &EnergyLedger {
        &self.ledger
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self) -> f64 {
        self.state.time
    }

    /// Largest admissible step from the current state.
    pub fn cfl_dt(&self) -> f64 {
        cfl_dt(&self.state, self.cfl_number, &self.grid, self.dt_cap)
    }

    fn flush_pending(&mut self) {
        if let Some(row) = self.pending.take() {
            self.ledger.push(row);
        }
    }

    /// Takes one coupled step of size `dt` and records it.
    pub fn step(&mut self, dt: f64) -> Result<()> {
        let result = coupled_step(&self.state, dt, &self.settings, &self.params).and_then(|next| {
            let energy = total_energy(&next, &self.params)?;
            Ok((next, energy))
        });
        let (next, energy) = match result {
            Ok(v) => v,
            Err(e) => {
                self.flush_pending();
                self.ledger.failure = Some(format!("t = {}: {e}", self.state.time));
                return Err(e);
            }
        };
        let dissipation = dissipation(&next, &self.params);
        let residual = (energy.total - self.energy.total) / dt + dissipation.total;
        let row = ledger_row(&next, energy, &self.params, residual);
        self.state = next;
        self.energy = energy;
        self.steps += 1;
        if self.steps % self.ledger_every == 0 {
            self.pending = None;
            self.ledger.push(row);
        } else {
            self.pending = Some(row);
        }
        Ok(())
    }

    /// Integrates to `t_end`. With `fixed_dt` every step uses the cap and a
    /// binding CFL limit is an error instead of a step reduction.
    pub fn advance_to(&mut self, t_end: f64, fixed_dt: bool) -> Result<()> {
        self.advance_with(t_end, fixed_dt, |_| Ok(()))
    }

    /// Like [`Simulation::advance_to`], calling `after_step` after every step.
    pub fn advance_with(
        &mut self,
        t_end: f64,
        fixed_dt: bool,
        mut after_step: impl FnMut(&Simulation) -> Result<()>,
    ) -> Result<()> {
        loop {
            let remaining = t_end - self.state.time;
            if remaining <= 1e-9 * self.dt_cap {
                break;
            }
            let dt = if fixed_dt {
                let limit = cfl_dt(&self.state, self.cfl_number, &self.grid, f64::INFINITY);
                if self.dt_cap > limit {
                    return Err(MaggError::CflViolation {
                        dt: self.dt_cap,
                        limit,
                    });
                }
                self.dt_cap
            } else {
                self.cfl_dt()
            };
            self.step(dt.min(remaining))?;
            after_step(self)?;
        }
        self.flush_pending();
        Ok(())
    }
}

/// Everything a finished run produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub state: State,
    pub ledger: EnergyLedger,
    pub snapshots: Vec<PathBuf>,
}

/// Integrates `config` to `t_end`, writing `ledger.csv` and snapshots to `out_dir`.
///
/// On failure the partial ledger, a `failed.snap` of the last good state and
/// `failure.txt` are still written before the error is returned.
pub fn run(config: &SimConfig, out_dir: Option<&Path>) -> Result<RunOutput> {
    let mut sim = Simulation::new(config)?;
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| MaggError::io(dir, e))?;
    }
    let mut snapshots = Vec::new();
    let every = config.output.snapshot_every;
    let result = sim.advance_with(config.t_end, false, |s| {
        if let (Some(dir), true) = (out_dir, every > 0 && s.steps() % every == 0) {
            let path = dir.join(format!("snapshot_{:06}.snap", s.steps()));
            io::write_snapshot(s.state(), &path)?;
            snapshots.push(path);
        }
        Ok(())
    });
    if let Some(dir) = out_dir {
        io::write_ledger_csv(sim.ledger(), &dir.join("ledger.csv"))?;
        let tag = if result.is_ok() { "final" } else { "failed" };
        let path = dir.join(format!("{tag}.snap"));
        io::write_snapshot(sim.state(), &path)?;
        snapshots.push(path);
        if let Some(msg) = &sim.ledger().failure {
            std::fs::write(dir.join("failure.txt"), msg)
                .map_err(|e| MaggError::io(dir.join("failure.txt"), e))?;
        }
    }
    result?;
    let (state, ledger) = sim.into_parts();
    Ok(RunOutput {
        state,
        ledger,
        snapshots,
    })
}
