use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use magg_core::cahn_hilliard::mollify_initial_phi;
use magg_core::diagnostics::{self, SweepFailure, SweepResult};
use magg_core::io;
use magg_core::simulation::{self, initial_state};
use magg_core::{MaggError, SimConfig, State};

/// Pseudo-spectral solver for binary micropolar fluid mixtures on the
/// periodic square.
///
/// Configs are strict JSON: unknown keys are rejected. Defaults:
/// cfl_number 0.4, seed 0, output.ledger_every 1, output.snapshot_every 0
/// (final snapshot only), grid.dealias "two_thirds", params.eta_r [0, 0],
/// params.cd [1, 1], params.ca [0.5, 0.5], params.c0 [1, 1], params.theta 1,
/// params.theta0 2, params.alpha 0, params.variant "magg",
/// flow.pressure_iterations 60, flow.pressure_tol 1e-13.
///
/// Exit status: 0 success, 1 invalid input, 2 solver failure.
#[derive(Debug, Parser)]
#[command(name = "magg", version, arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a config to t_end; writes ledger.csv and snapshots.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Micropolar runs for each rotational viscosity against the nonpolar reference.
    SweepEtar {
        #[arg(long)]
        config: PathBuf,
        /// Strictly decreasing, positive.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Micropolar runs for each density mismatch against Model H.
    CompareModelh {
        #[arg(long)]
        config: PathBuf,
        /// Strictly decreasing, non-negative.
        #[arg(long, value_delimiter = ',', required = true)]
        mismatch: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Order of the energy-law residual under step halving.
    CheckEnergy {
        #[arg(long)]
        config: PathBuf,
        /// Strictly decreasing step sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        dts: Vec<f64>,
    },
    /// Regularize the initial phase field by truncating its chemical potential at level k.
    Mollify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        k: f64,
        /// Optional snapshot of the mollified initial state.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Spatial self-convergence against the finest grid.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        /// Strictly increasing grid sizes.
        #[arg(long, value_delimiter = ',', required = true)]
        grids: Vec<usize>,
    },
}

enum Failure {
    Input(String),
    Solver(String),
}

impl From<MaggError> for Failure {
    fn from(e: MaggError) -> Self {
        if e.is_validation() || matches!(e, MaggError::Io { .. }) {
            Failure::Input(e.to_string())
        } else {
            Failure::Solver(e.to_string())
        }
    }
}

fn load(path: &Path) -> Result<SimConfig, Failure> {
    let (config, warnings) = io::load_config_with_warnings(path)?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    Ok(config)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("report serializes")
    );
}

fn finish_sweep(result: SweepResult, out: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(out).map_err(|e| MaggError::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    match result {
        Ok(report) => {
            let path = out.join("sweep_report.json");
            io::write_json(&report, &path)?;
            print_json(&report);
            Ok(())
        }
        Err(failure) => {
            let SweepFailure { partial, error } = *failure;
            if !partial.parameter_values.is_empty() {
                io::write_json(&partial, &out.join("sweep_report.partial.json"))?;
            }
            Err(error.into())
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let output = simulation::run(&cfg, Some(&out))?;
            let rows = &output.ledger.rows;
            let (first, last) = (rows.first().unwrap(), rows.last().unwrap());
            println!("steps written: {}", rows.len() - 1);
            println!("final time: {}", output.state.time);
            println!("energy: {:.12e} -> {:.12e}", first.energy.total, last.energy.total);
            println!("mass drift: {:.3e}", (last.mass - first.mass).abs());
            println!("min separation: {:.6e}", output.ledger.min_separation());
            println!("max energy residual: {:.6e}", output.ledger.max_abs_residual());
            println!("output: {}", out.display());
            Ok(())
        }
        Command::SweepEtar {
            config,
            values,
            out,
        } => {
            let cfg = load(&config)?;
            finish_sweep(diagnostics::etar_sweep(&cfg, &values), &out)
        }
        Command::CompareModelh {
            config,
            mismatch,
            out,
        } => {
            let cfg = load(&config)?;
            finish_sweep(diagnostics::modelh_sweep(&cfg, &mismatch), &out)
        }
        Command::CheckEnergy { config, dts } => {
            let cfg = load(&config)?;
            print_json(&diagnostics::energy_order(&cfg, &dts)?);
            Ok(())
        }
        Command::Mollify { config, k, out } => {
            let cfg = load(&config)?;
            let state = initial_state(&cfg)?;
            let (phi, report) = mollify_initial_phi(&state.phi, k, &cfg.params)?;
            if let Some(path) = out {
                let mollified = State::new(state.time, state.u, state.omega, phi, &cfg.params)?;
                io::write_snapshot(&mollified, &path)?;
            }
            print_json(&report);
            Ok(())
        }
        Command::Convergence { config, grids } => {
            let cfg = load(&config)?;
            print_json(&diagnostics::convergence(&cfg, &grids)?);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Input(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
