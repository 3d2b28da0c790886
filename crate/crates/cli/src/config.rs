//! Run configuration: a JSON document merged over defaults, with dotted-path overrides.

use std::path::Path;

use catbench_core::detection::{DetectorModel, VacuumSource};
use catbench_core::phase_space::Grid;
use catbench_core::sim::{ExperimentConfig, HistogramSpec};
use catbench_core::{BeamSplitterParams, PreparationConfig, SqueezeParams};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preparation: Preparation,
    pub detection: Detection,
    pub experiment: Experiment,
    pub grids: Grids,
}

/// Squeezed vacuum in mode 1, `|n>` in mode 2, `m` photons detected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Preparation {
    /// `|T|^2`.
    pub transmittance: f64,
    pub phi_t: f64,
    pub phi_r: f64,
    /// Squeezing parameter `kappa = -e^{i phi} tanh|xi|` as `[re, im]`.
    pub kappa: [f64; 2],
    /// When set, `kappa' = T^2 kappa` as `[re, im]`; replaces `kappa`.
    pub kappa_prime: Option<[f64; 2]>,
    pub n: usize,
    pub m: usize,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Detection {
    /// Click count conditioned on.
    pub k: usize,
    /// Efficiency of the single detector.
    pub eta_single: f64,
    pub channels: usize,
    /// Efficiency of each chopping channel.
    pub eta_chopping: f64,
    /// Channel counts tabulated in the entropy table.
    pub channels_min: usize,
    pub channels_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Experiment {
    /// `single` or `chopping`, using the efficiencies of `detection`.
    pub model: ModelKind,
    pub phi: f64,
    pub samples: usize,
    pub seed: u64,
    pub k_max: Option<usize>,
    pub tail_tol: f64,
    pub hist: HistogramSpec,
    /// Homodyne efficiencies of the smearing table.
    pub smearing_etas: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Single,
    Chopping,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grids {
    pub x: Grid,
    pub phases: Vec<f64>,
    /// Phase-space grid of the Wigner and Husimi tables, used for both axes.
    pub phase_space: Grid,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            preparation: Preparation {
                transmittance: 0.9,
                phi_t: 0.0,
                phi_r: 0.0,
                kappa: [-0.9, 0.0],
                kappa_prime: None,
                n: 0,
                m: 3,
                dim: catbench_core::DEFAULT_DIM,
            },
            detection: Detection {
                k: 3,
                eta_single: 0.3,
                channels: 20,
                eta_chopping: 0.9,
                channels_min: 5,
                channels_max: 50,
            },
            experiment: Experiment {
                model: ModelKind::Single,
                phi: 0.0,
                samples: 0,
                seed: 0,
                k_max: None,
                tail_tol: catbench_core::reconstruction::DEFAULT_TAIL_TOL,
                hist: HistogramSpec::default(),
                smearing_etas: vec![1.0, 0.98, 0.94],
            },
            grids: Grids {
                x: Grid::default(),
                phases: vec![0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2],
                phase_space: Grid {
                    x_min: -6.0,
                    x_max: 6.0,
                    points: 61,
                },
            },
        }
    }
}

/// Recursively overlays `patch` on `base`; objects merge, everything else replaces.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Sets `path` (dot separated) to `raw`, read as JSON when it parses and as a string otherwise.
fn apply_override(doc: &mut Value, path: &str, raw: &str) -> Result<(), CliError> {
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = doc;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!("malformed override path '{path}'")));
    }
    for key in &keys[..keys.len() - 1] {
        node = node
            .as_object_mut()
            .and_then(|o| o.get_mut(*key))
            .ok_or_else(|| CliError::Config(format!("unknown override path '{path}'")))?;
    }
    let obj = node
        .as_object_mut()
        .ok_or_else(|| CliError::Config(format!("override path '{path}' does not name a field")))?;
    let last = keys[keys.len() - 1];
    if !obj.contains_key(last) {
        return Err(CliError::Config(format!("unknown override path '{path}'")));
    }
    obj.insert(last.to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Defaults, then the file, then `key=value` overrides, then `seed`.
    pub fn load(path: Option<&Path>, overrides: &[String], seed: Option<u64>) -> Result<Self, CliError> {
        let mut doc = serde_json::to_value(Self::default()).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let file: Value =
                serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            if !file.is_object() {
                return Err(CliError::Config(format!("{}: expected a JSON object", path.display())));
            }
            merge(&mut doc, file);
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override '{o}' is not key=value")))?;
            apply_override(&mut doc, k.trim(), v.trim())?;
        }
        let mut cfg: Self = serde_json::from_value(doc).map_err(|e| CliError::Config(e.to_string()))?;
        if let Some(s) = seed {
            cfg.experiment.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Builds every core object once so invalid values surface before any computation.
    pub fn validate(&self) -> Result<(), CliError> {
        self.preparation()?;
        self.single().validate()?;
        self.chopping().validate()?;
        self.grids.x.validate()?;
        self.grids.phase_space.validate()?;
        self.experiment.hist.validate()?;
        let d = &self.detection;
        if d.channels_min == 0 || d.channels_min > d.channels_max {
            return Err(CliError::Config(
                "detection.channels_min must lie in 1..=channels_max".into(),
            ));
        }
        if self.grids.phases.is_empty() || self.grids.phases.iter().any(|p| !p.is_finite()) {
            return Err(CliError::Config(
                "grids.phases must be a non-empty list of finite numbers".into(),
            ));
        }
        if self.experiment.smearing_etas.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(CliError::Config("experiment.smearing_etas must lie in (0, 1]".into()));
        }
        if self.experiment.tail_tol.is_nan() || self.experiment.tail_tol <= 0.0 {
            return Err(CliError::Config("experiment.tail_tol must be positive".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON of the resolved configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).unwrap_or_default();
        Sha256::digest(text.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn kappa(&self) -> Result<C64, CliError> {
        let p = &self.preparation;
        match p.kappa_prime {
            None => Ok(C64::new(p.kappa[0], p.kappa[1])),
            Some([re, im]) => {
                let bs = BeamSplitterParams::from_transmittance(p.transmittance, p.phi_t, p.phi_r)?;
                let t = bs.t();
                Ok(C64::new(re, im) / (t * t))
            }
        }
    }

    pub fn preparation(&self) -> Result<PreparationConfig, CliError> {
        let p = &self.preparation;
        let bs = BeamSplitterParams::from_transmittance(p.transmittance, p.phi_t, p.phi_r)?;
        let sq = SqueezeParams::from_kappa(self.kappa()?)?;
        Ok(PreparationConfig::new(bs, sq, p.n, p.m, p.dim)?)
    }

    pub fn single(&self) -> DetectorModel {
        DetectorModel::Single {
            eta: self.detection.eta_single,
        }
    }

    pub fn chopping(&self) -> DetectorModel {
        self.chopping_with(self.detection.channels)
    }

    pub fn chopping_with(&self, channels: usize) -> DetectorModel {
        DetectorModel::Chopping {
            channels,
            eta: self.detection.eta_chopping,
        }
    }

    pub fn model(&self) -> DetectorModel {
        match self.experiment.model {
            ModelKind::Single => self.single(),
            ModelKind::Chopping => self.chopping(),
        }
    }

    /// Squeezed vacuum through the beam splitter with vacuum in the other input.
    pub fn source(&self) -> Result<VacuumSource, CliError> {
        let prep = self.preparation()?;
        Ok(VacuumSource::new(prep.kappa_prime(), self.preparation.transmittance)?)
    }

    /// The virtual experiment; needs vacuum in the second input.
    pub fn experiment(&self) -> Result<ExperimentConfig, CliError> {
        if self.preparation.n != 0 {
            return Err(CliError::Config(
                "simulate and reconstruct need preparation.n = 0 (vacuum in the second input)".into(),
            ));
        }
        let e = &self.experiment;
        let mut cfg = ExperimentConfig::new(self.source()?, self.model(), self.detection.k);
        cfg.phi = e.phi;
        cfg.samples = e.samples;
        cfg.seed = e.seed;
        cfg.hist = e.hist;
        cfg.target_m = Some(self.preparation.m);
        cfg.k_max = e.k_max;
        cfg.tail_tol = e.tail_tol;
        cfg.grid = self.grids.x;
        Ok(cfg)
    }
}
