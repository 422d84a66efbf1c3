//! Run configuration: one TOML document pinning everything a simulation
//! needs, so a run is reproducible from its config alone. Serialization is
//! lossless (floats round-trip exactly through the shortest-decimal TOML
//! encoding), which makes the config hash in output artifacts meaningful.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelParams, MobilityVariant};
use crate::solver::SolverConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read config {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("failed to parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid configuration: {reason}")]
    Invalid { reason: String },
}

/// PDE instance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    /// Degeneracy exponent of the mobility.
    pub n: f64,
    /// Interface-width parameter.
    pub epsilon: f64,
    pub mobility: MobilityVariant,
}

impl Default for ModelSection {
    fn default() -> Self {
        Self {
            n: 4.0,
            epsilon: 0.1,
            mobility: MobilityVariant::Plain,
        }
    }
}

/// Spatial resolution.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    /// Number of finite-volume cells on `[0, 1]`.
    pub cells: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { cells: 4000 }
    }
}

/// Initial data `u(r, 0) = -A tanh((r - c)/eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialSection {
    pub amplitude: f64,
    pub center: f64,
    /// Hard-set the boundary nodes to `+/- amplitude`.
    pub clamp_endpoints: bool,
}

impl Default for InitialSection {
    fn default() -> Self {
        Self {
            amplitude: crate::model::DEFAULT_AMPLITUDE,
            center: crate::model::DEFAULT_CENTER,
            clamp_endpoints: false,
        }
    }
}

/// Time horizon and snapshot policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub t_end: f64,
    /// Explicit snapshot times; takes precedence when nonempty.
    pub snapshot_times: Vec<f64>,
    /// Otherwise: log-spaced snapshots from `snapshot_from` to `t_end`.
    pub snapshots_per_decade: usize,
    pub snapshot_from: f64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            t_end: 1e12,
            snapshot_times: Vec::new(),
            snapshots_per_decade: 8,
            snapshot_from: 1.0,
        }
    }
}

/// Complete description of one simulation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub initial: InitialSection,
    pub run: RunSection,
    pub solver: SolverConfig,
}

impl RunConfig {
    /// Model parameters for the solver.
    pub fn model_params(&self) -> ModelParams {
        ModelParams::new(self.model.epsilon, self.model.n, self.model.mobility)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |reason: String| Err(ConfigError::Invalid { reason });
        if !(self.model.epsilon > 0.0 && self.model.epsilon.is_finite()) {
            return fail(format!("epsilon must be positive, got {}", self.model.epsilon));
        }
        if !(self.model.n >= 0.0 && self.model.n.is_finite()) {
            return fail(format!("n must be nonnegative, got {}", self.model.n));
        }
        if self.grid.cells < 16 {
            return fail(format!("need at least 16 cells, got {}", self.grid.cells));
        }
        if !(self.initial.amplitude > 0.0 && self.initial.amplitude <= 1.0) {
            return fail(format!(
                "amplitude must lie in (0, 1], got {}",
                self.initial.amplitude
            ));
        }
        if !(self.initial.center > 0.0 && self.initial.center < 1.0) {
            return fail(format!(
                "center must lie in (0, 1), got {}",
                self.initial.center
            ));
        }
        if !(self.run.t_end > 0.0 && self.run.t_end.is_finite()) {
            return fail(format!("t_end must be positive, got {}", self.run.t_end));
        }
        if !(self.run.snapshot_from > 0.0) {
            return fail(format!(
                "snapshot_from must be positive, got {}",
                self.run.snapshot_from
            ));
        }
        if self
            .run
            .snapshot_times
            .iter()
            .any(|&t| !(t > 0.0 && t.is_finite()))
        {
            return fail("snapshot_times must be positive and finite".into());
        }
        self.solver
            .validate()
            .map_err(|reason| ConfigError::Invalid { reason })?;
        Ok(())
    }

    /// Canonical TOML serialization (fixed key order; shortest decimal
    /// floats). Also the byte stream the config hash is computed over.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("RunConfig serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        let cfg = RunConfig::default();
        cfg.validate().unwrap();
        let text = cfg.to_toml();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_documents_fill_in_defaults() {
        let cfg = RunConfig::from_toml("[model]\nn = 3.0\n").unwrap();
        assert_eq!(cfg.model.n, 3.0);
        assert_eq!(cfg.model.epsilon, 0.1);
        assert_eq!(cfg.grid.cells, 4000);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        assert!(RunConfig::from_toml("[model]\nnn = 3.0\n").is_err());
        assert!(matches!(
            RunConfig::from_toml("[model]\nepsilon = -0.1\n"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            RunConfig::from_toml("[grid]\ncells = 2\n"),
            Err(ConfigError::Invalid { .. })
        ));
        assert!(matches!(
            RunConfig::from_toml("[run]\nt_end = 0.0\n"),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn mobility_names_are_lowercase() {
        let cfg = RunConfig::from_toml("[model]\nmobility = \"truncated\"\n").unwrap();
        assert_eq!(cfg.model.mobility, MobilityVariant::Truncated);
        assert!(cfg.to_toml().contains("mobility = \"truncated\""));
    }

    prop_compose! {
        fn arb_config()(
            n in 0.0f64..8.0,
            epsilon in 1e-3f64..0.5,
            cells in 16usize..50_000,
            amplitude in 0.05f64..1.0,
            center in 0.05f64..0.95,
            t_end in 1e-6f64..1e15,
            per_decade in 0usize..64,
            snapshot_from in 1e-8f64..1.0,
            time_tol in 1e-9f64..1e-4,
            mobility in prop::sample::select(vec![
                MobilityVariant::Plain,
                MobilityVariant::Truncated,
                MobilityVariant::Absolute,
            ]),
            times in prop::collection::vec(1e-3f64..1e14, 0..4),
        ) -> RunConfig {
            let mut cfg = RunConfig::default();
            cfg.model.n = n;
            cfg.model.epsilon = epsilon;
            cfg.model.mobility = mobility;
            cfg.grid.cells = cells;
            cfg.initial.amplitude = amplitude;
            cfg.initial.center = center;
            cfg.run.t_end = t_end;
            cfg.run.snapshots_per_decade = per_decade;
            cfg.run.snapshot_from = snapshot_from;
            cfg.run.snapshot_times = times;
            cfg.solver.time_tol = time_tol;
            cfg
        }
    }

    proptest! {
        /// TOML round-trips are lossless, bit for bit, including floats.
        #[test]
        fn toml_round_trip_is_lossless(cfg in arb_config()) {
            prop_assert!(cfg.validate().is_ok());
            let text = cfg.to_toml();
            let back = RunConfig::from_toml(&text).unwrap();
            prop_assert_eq!(&cfg, &back);
            // And re-serialization is byte-stable.
            prop_assert_eq!(text, back.to_toml());
        }
    }
}
