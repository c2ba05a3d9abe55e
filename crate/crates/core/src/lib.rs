//! Pseudo-spectral simulation of binary micropolar fluid mixtures on the
//! periodic square.
//!
//! The solver couples a convective Cahn–Hilliard equation for the phase field
//! `φ`, a variable-density momentum balance for the solenoidal velocity `u`,
//! and a scalar micro-rotation `ω`. Setting the rotational viscosity to zero
//! recovers the unmatched-density two-phase model; matching the densities as
//! well recovers Model H. Diagnostics measure the energy balance, mass
//! conservation, strict separation, and how fast the micropolar solution
//! approaches its nonpolar reductions.
//!
//! Module map:
//! - [`spectral`]: grids, fields and Fourier-side operators
//! - [`model`]: constitutive laws, potentials, energy and dissipation
//! - [`cahn_hilliard`]: the phase-field sub-step and initial-data preparation
//! - [`hydrodynamics`]: momentum and micro-rotation sub-steps
//! - [`simulation`]: configuration, the coupled time loop and the ledger
//! - [`diagnostics`]: difference norms, parameter sweeps and rate fits
//! - [`io`]: config files, snapshots, CSV ledgers and sweep reports

pub mod cahn_hilliard;
pub mod diagnostics;
pub mod error;
pub mod hydrodynamics;
pub mod io;
mod krylov;
pub mod model;
pub mod simulation;
pub mod spectral;

pub use error::{MaggError, Result};
pub use model::{
    DissipationBreakdown, EnergyBreakdown, ModelParams, Potential, PotentialKind, State, Variant,
};
pub use simulation::{EnergyLedger, LedgerRow, SimConfig, Simulation};
pub use spectral::{make_grid, Axis, DealiasRule, Field, SpectralGrid, VecField};
