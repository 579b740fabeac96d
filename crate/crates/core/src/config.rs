//! TOML experiment configuration.
//!
//! One file describes the model, grid, solver, initial data and the
//! command-specific blocks. Parsing is strict (unknown keys are errors) and
//! the canonical re-emission is hashed into every output header.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::model::MixtureModel;
use crate::solver::{InitSpec, SolverParams, SystemKind};
use crate::thermo::EnergyLaw;
use crate::Matrix;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    /// Number of species; must match `laws` and `b`.
    pub n: usize,
    pub eps: f64,
    /// Strictly decreasing friction scales for `sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_list: Option<Vec<f64>>,
    /// Symmetric friction coefficients; the diagonal is ignored.
    pub b: Vec<Vec<f64>>,
    pub laws: Vec<EnergyLaw>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_cells: usize,
    #[serde(default = "unit")]
    pub length: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Write per-snapshot CSV files.
    pub snapshots: bool,
    /// Write the per-step diagnostics stream.
    pub diagnostics: bool,
    /// Constant of the energy-audit tolerance.
    pub audit_constant: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { snapshots: true, diagnostics: true, audit_constant: crate::diagnostics::AUDIT_CONSTANT }
    }
}

/// Acceptance band of the fitted sweep slope.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SlopeBand {
    pub min: f64,
    pub max: f64,
}

impl SlopeBand {
    pub fn contains(&self, slope: f64) -> bool {
        slope >= self.min && slope <= self.max
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckConfig {
    /// Random density samples in addition to the configured base state.
    pub samples: usize,
    pub seed: u64,
    pub rho_lo: f64,
    pub rho_hi: f64,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self { samples: 100, seed: 1, rho_lo: 0.1, rho_hi: 10.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// System integrated by `simulate`.
    #[serde(default = "default_system")]
    pub system: SystemKind,
    /// Reference system of `compare` and `sweep`.
    #[serde(default = "default_reference")]
    pub reference: SystemKind,
    pub model: ModelConfig,
    pub grid: GridConfig,
    #[serde(default)]
    pub solver: SolverParams,
    #[serde(default)]
    pub init: InitSpec,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_band: Option<SlopeBand>,
    #[serde(default)]
    pub check: CheckConfig,
}

fn default_system() -> SystemKind {
    SystemKind::Relaxation
}

fn default_reference() -> SystemKind {
    SystemKind::ChapmanEnskog
}

impl ExperimentConfig {
    /// Parses and validates a TOML document.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    /// Canonical TOML form.
    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// SHA-256 of the canonical form, hex encoded.
    pub fn hash(&self) -> Result<String> {
        let digest = Sha256::digest(self.to_toml()?.as_bytes());
        Ok(digest.iter().map(|b| format!("{b:02x}")).collect())
    }

    pub fn validate(&self) -> Result<()> {
        let m = &self.model;
        if m.laws.len() != m.n {
            return Err(Error::Config(format!("model.n = {} but {} laws given", m.n, m.laws.len())));
        }
        if let Some(list) = &m.eps_list {
            if list.is_empty() {
                return Err(Error::Validation("eps_list is empty".into()));
            }
            if list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                return Err(Error::Validation("eps_list entries must be positive".into()));
            }
            if list.windows(2).any(|w| !(w[1] < w[0])) {
                return Err(Error::Validation("eps_list must be strictly decreasing".into()));
            }
        }
        if let Some(band) = self.slope_band {
            if !(band.min <= band.max) {
                return Err(Error::Validation("slope_band.min exceeds slope_band.max".into()));
            }
        }
        if self.reference == SystemKind::Relaxation {
            return Err(Error::Validation("reference must be chapman_enskog or limit".into()));
        }
        let c = &self.check;
        if !(c.rho_lo > 0.0 && c.rho_lo < c.rho_hi && c.rho_hi.is_finite()) {
            return Err(Error::Validation("check density range must satisfy 0 < rho_lo < rho_hi".into()));
        }
        self.solver.validate()?;
        self.grid()?;
        self.build_model()?;
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.grid.n_cells, self.grid.length)
    }

    /// Model at the configured `eps`.
    pub fn build_model(&self) -> Result<MixtureModel> {
        let b = Matrix::from_rows(&self.model.b)
            .map_err(|_| Error::Validation("model.b must be a square matrix".into()))?;
        MixtureModel::new(self.model.laws.clone(), b, self.model.eps)
    }

    /// The sweep list, defaulting to the single configured `eps`.
    pub fn eps_list(&self) -> Vec<f64> {
        self.model.eps_list.clone().unwrap_or_else(|| vec![self.model.eps])
    }
}
