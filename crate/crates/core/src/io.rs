//! Config files, binary snapshots, CSV ledgers and JSON reports.
//!
//! Snapshot layout, all little-endian:
//!
//! ```text
//! b"MAGG" | u32 version = 1 | u32 n | f64 box_length | f64 time | u32 field_count
//! then per field: u32 name_len | name (UTF-8) | n² f64, row-major
//! ```
//!
//! Fields written are `phi`, `u_x`, `u_y`, `omega`. `μ` and `p` are not
//! stored; `μ` is recomputed from `φ` on load and `p` restarts at zero.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use crate::error::{MaggError, Result};
use crate::model::{ModelParams, State};
use crate::simulation::{EnergyLedger, SimConfig};
use crate::spectral::{DealiasRule, Field, SpectralGrid, VecField};

pub const SNAPSHOT_MAGIC: [u8; 4] = *b"MAGG";
pub const SNAPSHOT_VERSION: u32 = 1;
const SNAPSHOT_FIELDS: [&str; 4] = ["phi", "u_x", "u_y", "omega"];

pub const LEDGER_COLUMNS: [&str; 16] = [
    "t",
    "E_total",
    "E_kin_u",
    "E_kin_omega",
    "E_grad",
    "E_pot",
    "D_total",
    "D_mu",
    "D_visc",
    "D_rot",
    "D_omega",
    "mass",
    "separation",
    "max_u",
    "div_residual",
    "energy_residual",
];

/// Parses a config from JSON text and validates it; returns the config and
/// any soft warnings.
pub fn parse_config(text: &str) -> Result<(SimConfig, Vec<String>)> {
    let config: SimConfig =
        serde_json::from_str(text).map_err(|e| MaggError::Parse(e.to_string()))?;
    let warnings = config.validate()?;
    Ok((config, warnings))
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    load_config_with_warnings(path).map(|(c, _)| c)
}

pub fn load_config_with_warnings(path: &Path) -> Result<(SimConfig, Vec<String>)> {
    let text = std::fs::read_to_string(path).map_err(|e| MaggError::io(path, e))?;
    let (mut config, warnings) = parse_config(&text)?;
    // snapshot paths are relative to the config file
    if let crate::simulation::InitialCondition::FromSnapshot { path: snap } =
        &mut config.initial_condition
    {
        if snap.is_relative() {
            if let Some(dir) = path.parent() {
                *snap = dir.join(&*snap);
            }
        }
    }
    Ok((config, warnings))
}

pub fn config_to_json(config: &SimConfig) -> String {
    serde_json::to_string_pretty(config).expect("config serializes")
}

/// Serializes a state to the snapshot byte format.
pub fn snapshot_bytes(state: &State) -> Vec<u8> {
    let grid = state.grid();
    let n = grid.n();
    let mut out = Vec::with_capacity(32 + 4 * (16 + 8 * n * n));
    out.extend_from_slice(&SNAPSHOT_MAGIC);
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&grid.box_length().to_le_bytes());
    out.extend_from_slice(&state.time.to_le_bytes());
    out.extend_from_slice(&(SNAPSHOT_FIELDS.len() as u32).to_le_bytes());
    let fields = [&state.phi, &state.u.x, &state.u.y, &state.omega];
    for (name, field) in SNAPSHOT_FIELDS.iter().zip(fields) {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        for v in field.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_snapshot(state: &State, path: &Path) -> Result<()> {
    std::fs::write(path, snapshot_bytes(state)).map_err(|e| MaggError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < len {
            return Err(MaggError::Truncated(format!(
                "{what}: needed {len} bytes at offset {}, {} left",
                self.pos,
                self.bytes.len() - self.pos
            )));
        }
        let slice = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64(&mut self, what: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, what)?.try_into().unwrap()))
    }
}

/// Raw snapshot contents before a state is rebuilt.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotData {
    pub n: usize,
    pub box_length: f64,
    pub time: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

pub fn parse_snapshot(bytes: &[u8]) -> Result<SnapshotData> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.take(4, "magic")?.try_into().unwrap();
    if magic != SNAPSHOT_MAGIC {
        return Err(MaggError::MagicMismatch { found: magic });
    }
    let version = r.u32("version")?;
    if version != SNAPSHOT_VERSION {
        return Err(MaggError::VersionMismatch(version));
    }
    let n = r.u32("n")? as usize;
    let box_length = r.f64("box_length")?;
    let time = r.f64("time")?;
    let count = r.u32("field_count")? as usize;
    let mut fields = Vec::with_capacity(count.min(16));
    for i in 0..count {
        let len = r.u32("field name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "field name")?)
            .map_err(|_| MaggError::MalformedSnapshot(format!("field {i} name is not UTF-8")))?
            .to_string();
        let raw = r.take(n.checked_mul(n).and_then(|m| m.checked_mul(8)).ok_or_else(|| {
            MaggError::MalformedSnapshot(format!("grid size {n} overflows"))
        })?, &name)?;
        let values = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        fields.push((name, values));
    }
    if r.pos != bytes.len() {
        return Err(MaggError::MalformedSnapshot(format!(
            "{} trailing bytes after the last field",
            bytes.len() - r.pos
        )));
    }
    Ok(SnapshotData {
        n,
        box_length,
        time,
        fields,
    })
}

/// Reads a snapshot onto a grid with the default dealiasing rule.
pub fn read_snapshot(path: &Path, params: &ModelParams) -> Result<State> {
    read_snapshot_with_rule(path, params, DealiasRule::default())
}

pub fn read_snapshot_with_rule(path: &Path, params: &ModelParams, rule: DealiasRule) -> Result<State> {
    let bytes = std::fs::read(path).map_err(|e| MaggError::io(path, e))?;
    state_from_snapshot(&parse_snapshot(&bytes)?, params, rule)
}

pub fn state_from_snapshot(data: &SnapshotData, params: &ModelParams, rule: DealiasRule) -> Result<State> {
    let grid = SpectralGrid::new(data.n, data.box_length, rule)
        .map_err(|e| MaggError::MalformedSnapshot(e.to_string()))?;
    let get = |name: &str| -> Result<Field> {
        let (_, values) = data
            .fields
            .iter()
            .find(|(n, _)| n == name)
            .ok_or_else(|| MaggError::MalformedSnapshot(format!("missing field `{name}`")))?;
        Ok(Field::from_values(&grid, values.clone()))
    };
    let u = VecField::new(get("u_x")?, get("u_y")?);
    State::new(data.time, u, get("omega")?, get("phi")?, params).map(State::canonical)
}

fn fmt(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_ledger_csv(ledger: &EnergyLedger, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| MaggError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    w.write_record(LEDGER_COLUMNS)?;
    for r in &ledger.rows {
        let e = &r.energy;
        let d = &r.dissipation;
        let values = [
            r.t,
            e.total,
            e.kinetic_u,
            e.kinetic_omega,
            e.gradient,
            e.potential,
            d.total,
            d.mu_grad,
            d.viscous_sym,
            d.rotational_coupling,
            d.omega_diffusion,
            r.mass,
            r.separation,
            r.max_u,
            r.div_residual,
            r.energy_residual,
        ];
        w.write_record(values.iter().map(|&v| fmt(v)))?;
    }
    w.flush().map_err(|e| MaggError::io(path, e))?;
    Ok(())
}

/// Writes any serializable report as pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| MaggError::io(path, e))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| MaggError::io(path, e))
}
