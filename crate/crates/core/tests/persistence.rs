use std::path::Path;

use magg_core::io::{
    config_to_json, load_config, parse_config, parse_snapshot, read_snapshot, snapshot_bytes,
    state_from_snapshot, write_ledger_csv, write_snapshot, LEDGER_COLUMNS,
};
use magg_core::simulation::run;
use magg_core::{DealiasRule, MaggError, ModelParams};

const MINIMAL: &str = r#"{
  "grid": { "n": 64, "box_length": 6.2831853 },
  "params": { "sigma": 1.0, "eps": 0.5, "rho1": 1.0, "rho2": 1.0,
              "eta": [1.0, 1.0], "potential": "quartic" },
  "dt": 1e-3,
  "t_end": 0.25
}"#;

fn golden_path() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/golden_n8.snap"))
}

fn golden_value(name: &str, i: usize, j: usize) -> f64 {
    let (i, j) = (i as f64, j as f64);
    match name {
        "phi" => (i - 3.5) / 16.0 + j / 64.0,
        "u_x" => 0.125 * j - 0.5,
        "u_y" => -0.25 * i + 1.0 / 3.0,
        "omega" => i * j / 256.0 - 0.0625,
        _ => unreachable!(),
    }
}

#[test]
fn minimal_config_is_valid() {
    let (cfg, warnings) = parse_config(MINIMAL).unwrap();
    assert_eq!(cfg.grid.n, 64);
    assert_eq!(cfg.cfl_number, 0.4);
    assert!(warnings.is_empty());
}

#[test]
fn log_potential_needs_ordered_temperatures() {
    let text = MINIMAL.replace(
        r#""potential": "quartic""#,
        r#""potential": "logarithmic", "theta": 2.0, "theta0": 1.5"#,
    );
    let err = parse_config(&text).unwrap_err();
    assert!(err.is_validation());
    assert!(err.to_string().contains("0 < θ < θ₀"), "{err}");
}

#[test]
fn unknown_keys_are_named() {
    let text = MINIMAL.replace(r#""eta": [1.0, 1.0]"#, r#""eta": [1.0, 1.0], "viscocity": 2.0"#);
    let err = parse_config(&text).unwrap_err();
    assert!(matches!(err, MaggError::Parse(_)));
    assert!(err.to_string().contains("viscocity"), "{err}");
    let broken = parse_config("{ \"grid\": ").unwrap_err();
    assert!(broken.to_string().contains("line"), "{broken}");
}

#[test]
fn config_serialization_is_idempotent() {
    let (cfg, _) = parse_config(MINIMAL).unwrap();
    let once = config_to_json(&cfg);
    let twice = config_to_json(&parse_config(&once).unwrap().0);
    assert_eq!(once, twice);
}

#[test]
fn shipped_configs_load() {
    let dir = Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"));
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert!(count >= 4);
}

#[test]
fn golden_snapshot_decodes() {
    let bytes = std::fs::read(golden_path()).unwrap();
    let data = parse_snapshot(&bytes).unwrap();
    assert_eq!((data.n, data.box_length, data.time), (8, 2.0, 0.75));
    let names: Vec<&str> = data.fields.iter().map(|(n, _)| n.as_str()).collect();
    assert_eq!(names, ["phi", "u_x", "u_y", "omega"]);
    for (name, values) in &data.fields {
        for j in 0..8 {
            for i in 0..8 {
                assert_eq!(values[j * 8 + i], golden_value(name, i, j));
            }
        }
    }
}

#[test]
fn golden_snapshot_reencodes_byte_for_byte() {
    let bytes = std::fs::read(golden_path()).unwrap();
    let state = state_from_snapshot(
        &parse_snapshot(&bytes).unwrap(),
        &ModelParams::default(),
        DealiasRule::TwoThirds,
    )
    .unwrap();
    assert_eq!(snapshot_bytes(&state), bytes);
}

#[test]
fn run_outputs_round_trip() {
    let text = MINIMAL
        .replace("\"n\": 64", "\"n\": 16")
        .replace("\"t_end\": 0.25", "\"t_end\": 0.01, \"initial_condition\": { \"type\": \"tanh_stripe\", \"width\": 0.5, \"amplitude\": 0.8 }");
    let (cfg, _) = parse_config(&text).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = run(&cfg, Some(dir.path())).unwrap();

    let snap = dir.path().join("final.snap");
    let back = read_snapshot(&snap, &cfg.params).unwrap();
    assert_eq!(back.phi.values(), out.state.phi.values());
    assert_eq!(back.u.x.values(), out.state.u.x.values());
    assert_eq!(back.omega.values(), out.state.omega.values());
    let copy = dir.path().join("copy.snap");
    write_snapshot(&back, &copy).unwrap();
    assert_eq!(std::fs::read(&copy).unwrap(), std::fs::read(&snap).unwrap());

    let mut reader = csv::ReaderBuilder::new()
        .flexible(false)
        .from_path(dir.path().join("ledger.csv"))
        .unwrap();
    let headers: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(headers, LEDGER_COLUMNS);
    let rows: Vec<Vec<f64>> = reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), out.ledger.rows.len());
    for (parsed, row) in rows.iter().zip(&out.ledger.rows) {
        assert_eq!(parsed[0], row.t);
        assert_eq!(parsed[1], row.energy.total);
        assert_eq!(parsed[15], row.energy_residual);
    }

    let again = dir.path().join("again.csv");
    write_ledger_csv(&out.ledger, &again).unwrap();
    assert_eq!(
        std::fs::read(&again).unwrap(),
        std::fs::read(dir.path().join("ledger.csv")).unwrap()
    );
}
