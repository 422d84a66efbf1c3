//! Deterministic run artifacts.
//!
//! Every file starts with a header comment carrying the artifact format
//! version and the SHA-256 of the canonical TOML config that produced it,
//! so any output can be traced back to (and only to) its exact inputs.
//! Numbers are written with 17 significant digits (`{:.16e}`), which
//! round-trips `f64` exactly; together with the deterministic solver this
//! makes reruns byte-identical.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::config::RunConfig;
use crate::diagnostics::DiagnosticsSeries;
use crate::model::{ModelParams, RadialGrid, RadialState};
use crate::solver::{self, TouchdownEvent};

/// Bumped whenever the artifact layout changes.
pub const ARTIFACT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("failed to write {path}: {source}")]
    Write {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed artifact {path}: {reason}")]
    Malformed { path: String, reason: String },
}

/// Hex SHA-256 of the canonical TOML serialization of a config.
pub fn config_hash(cfg: &RunConfig) -> String {
    let mut hasher = Sha256::new();
    hasher.update(cfg.to_toml().as_bytes());
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        write!(hex, "{byte:02x}").expect("string write");
    }
    hex
}

fn artifact_header(hash: &str) -> String {
    format!("# chlab artifact v{ARTIFACT_VERSION} config_sha256={hash}\n")
}

fn write_file(path: &Path, contents: &str) -> Result<(), IoError> {
    fs::write(path, contents).map_err(|source| IoError::Write {
        path: path.display().to_string(),
        source,
    })
}

/// Diagnostics time series as CSV: one row per output time.
pub fn write_diagnostics_csv(
    path: &Path,
    series: &DiagnosticsSeries,
    hash: &str,
) -> Result<(), IoError> {
    let mut out = String::with_capacity(64 + 200 * series.len());
    out.push_str(&artifact_header(hash));
    out.push_str("t,mass,energy,dissipation,v0,rbar,vmin,d2v\n");
    for row in &series.rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            row.t, row.mass, row.energy, row.dissipation, row.v0, row.rbar, row.vmin, row.d2v
        )
        .expect("string write");
    }
    write_file(path, &out)
}

/// One profile snapshot as CSV with columns `r,u,v,mu`.
pub fn write_snapshot_csv(
    path: &Path,
    state: &RadialState,
    params: &ModelParams,
    grid: &RadialGrid,
    hash: &str,
) -> Result<(), IoError> {
    let mu = solver::chemical_potential(state, params, grid);
    let mut out = String::with_capacity(128 + 100 * grid.num_nodes());
    out.push_str(&artifact_header(hash));
    writeln!(out, "# t = {:.16e}", state.time).expect("string write");
    out.push_str("r,u,v,mu\n");
    for (i, &r) in grid.nodes.iter().enumerate() {
        let u = state.values[i];
        writeln!(out, "{:.16e},{:.16e},{:.16e},{:.16e}", r, u, 1.0 - u, mu[i])
            .expect("string write");
    }
    write_file(path, &out)
}

/// Parsed snapshot artifact.
#[derive(Clone, Debug)]
pub struct SnapshotData {
    pub time: f64,
    pub r: Vec<f64>,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub mu: Vec<f64>,
}

/// Read a snapshot CSV back (header comments included).
pub fn read_snapshot_csv(path: &Path) -> Result<SnapshotData, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    let malformed = |reason: &str| IoError::Malformed {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    let mut time = None;
    let mut data = SnapshotData {
        time: f64::NAN,
        r: Vec::new(),
        u: Vec::new(),
        v: Vec::new(),
        mu: Vec::new(),
    };
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("# t = ") {
            time = Some(
                rest.trim()
                    .parse::<f64>()
                    .map_err(|_| malformed("unparseable time header"))?,
            );
            continue;
        }
        if line.starts_with('#') || line.starts_with("r,") || line.is_empty() {
            continue;
        }
        let mut fields = line.split(',').map(|f| f.parse::<f64>());
        let mut next = || -> Result<f64, IoError> {
            fields
                .next()
                .ok_or_else(|| malformed("short row"))?
                .map_err(|_| malformed("unparseable number"))
        };
        data.r.push(next()?);
        data.u.push(next()?);
        data.v.push(next()?);
        data.mu.push(next()?);
    }
    data.time = time.ok_or_else(|| malformed("missing time header"))?;
    if data.r.is_empty() {
        return Err(malformed("no data rows"));
    }
    Ok(data)
}

/// Top-level run manifest tying all artifacts of a run together.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub artifact_version: u32,
    pub config_hash: String,
    pub config: RunConfig,
    pub t_final: f64,
    pub touchdown: Option<TouchdownEvent>,
    pub diagnostics_rows: usize,
    pub diagnostics_file: String,
    pub snapshot_files: Vec<String>,
    pub final_state_file: String,
}

/// Pretty JSON with a trailing newline (deterministic field order).
pub fn write_manifest_json(path: &Path, manifest: &RunManifest) -> Result<(), IoError> {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_file(path, &text)
}

pub fn read_manifest_json(path: &Path) -> Result<RunManifest, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::Read {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| IoError::Malformed {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::DiagRow;
    use crate::model::{initial_profile, MobilityVariant, ModelParams, RadialGrid};

    #[test]
    fn config_hash_is_stable_and_input_sensitive() {
        let cfg = RunConfig::default();
        let h1 = config_hash(&cfg);
        let h2 = config_hash(&cfg.clone());
        assert_eq!(h1, h2);
        assert_eq!(h1.len(), 64);
        let mut other = cfg;
        other.model.n = 3.0;
        assert_ne!(h1, config_hash(&other));
    }

    #[test]
    fn snapshot_round_trips_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("snap.csv");
        let grid = RadialGrid::new(64);
        let params = ModelParams::new(0.1, 2.0, MobilityVariant::Plain);
        let mut state = initial_profile(&grid, 0.1, 0.95, 0.5, false);
        state.time = 1.25e-3;
        write_snapshot_csv(&path, &state, &params, &grid, "deadbeef").unwrap();
        let back = read_snapshot_csv(&path).unwrap();
        assert_eq!(back.time, state.time);
        assert_eq!(back.r, grid.nodes);
        assert_eq!(back.u, state.values);
        for (v, u) in back.v.iter().zip(&state.values) {
            assert_eq!(*v, 1.0 - *u);
        }
        let mu = solver::chemical_potential(&state, &params, &grid);
        assert_eq!(back.mu, mu);
    }

    #[test]
    fn diagnostics_csv_has_header_and_full_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("diag.csv");
        let mut series = DiagnosticsSeries::new();
        series.append(DiagRow {
            t: 0.1,
            mass: -0.229_691_307_372_334_13,
            energy: 0.25,
            dissipation: -1e-9,
            v0: 1.95,
            rbar: 0.5,
            vmin: 0.05,
            d2v: 2.0,
        });
        write_diagnostics_csv(&path, &series, "cafe").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "# chlab artifact v1 config_sha256=cafe"
        );
        assert_eq!(lines.next().unwrap(), "t,mass,energy,dissipation,v0,rbar,vmin,d2v");
        let row = lines.next().unwrap();
        let mass: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(mass, -0.229_691_307_372_334_13);
    }

    #[test]
    fn manifest_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("manifest.json");
        let cfg = RunConfig::default();
        let manifest = RunManifest {
            artifact_version: ARTIFACT_VERSION,
            config_hash: config_hash(&cfg),
            config: cfg,
            t_final: 1e12,
            touchdown: None,
            diagnostics_rows: 17,
            diagnostics_file: "diagnostics.csv".into(),
            snapshot_files: vec!["snapshot_000.csv".into()],
            final_state_file: "final_state.csv".into(),
        };
        write_manifest_json(&path, &manifest).unwrap();
        let back = read_manifest_json(&path).unwrap();
        assert_eq!(back.config, manifest.config);
        assert_eq!(back.t_final, manifest.t_final);
        assert_eq!(back.snapshot_files, manifest.snapshot_files);
    }
}
