//! Experiment configuration files (TOML).
//!
//! Relative paths (`data.manifest`, `experiment.output_dir`) resolve against
//! the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::{FeatureConfig, SyntheticConfig};
use crate::error::{Error, Result};
use crate::federation::{mix_seed, ArchitectureConfig, FederationConfig, PipelineMode};
use crate::policy::ReplacementEconomics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    /// Fleet manifest; a synthetic fleet is generated when absent.
    pub manifest: Option<PathBuf>,
    pub train_ratio: f64,
    pub split_seed: u64,
    pub synthetic: SyntheticConfig,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            manifest: None,
            train_ratio: 0.75,
            split_seed: 0,
            synthetic: SyntheticConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Variant names; a bare `batch-federated` expands to one run per entry of `clusters`.
    pub variants: Vec<String>,
    pub clusters: Vec<usize>,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            variants: vec!["fully-federated".into()],
            clusters: vec![5, 20],
            output_dir: PathBuf::from("out"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub features: FeatureConfig,
    pub federation: FederationConfig,
    pub network: ArchitectureConfig,
    pub economics: ReplacementEconomics,
    pub experiment: RunConfig,
}

impl ExperimentConfig {
    /// Parses TOML text; relative paths are taken as given.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file, resolves relative paths against its directory and
    /// checks that the referenced manifest exists.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml(&text)
            .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.root())))?;
        let base = path.parent().unwrap_or_else(|| Path::new("."));
        if let Some(m) = &cfg.data.manifest {
            if m.is_relative() {
                cfg.data.manifest = Some(base.join(m));
            }
        }
        if cfg.experiment.output_dir.is_relative() {
            cfg.experiment.output_dir = base.join(&cfg.experiment.output_dir);
        }
        if let Some(m) = &cfg.data.manifest {
            if !m.is_file() {
                return Err(Error::io(
                    m,
                    std::io::Error::new(std::io::ErrorKind::NotFound, "manifest not found"),
                ));
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialize config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.data.train_ratio > 0.0 && self.data.train_ratio < 1.0) {
            return Err(Error::Config(format!(
                "data.train_ratio {} must lie in (0, 1)",
                self.data.train_ratio
            )));
        }
        if self.data.manifest.is_none()
            && self.data.synthetic.activation_cycle != self.features.activation_cycle
        {
            return Err(Error::Config(format!(
                "data.synthetic.activation_cycle ({}) differs from features.activation_cycle ({})",
                self.data.synthetic.activation_cycle, self.features.activation_cycle
            )));
        }
        if self.features.window == 0 || self.features.activation_cycle == 0 {
            return Err(Error::Config("features.window and activation_cycle must be >= 1".into()));
        }
        self.federation.validate()?;
        self.network.validate()?;
        self.economics.validate()?;
        self.variants()?;
        Ok(())
    }

    /// The variant list with cluster counts expanded, duplicates removed.
    pub fn variants(&self) -> Result<Vec<PipelineMode>> {
        let mut out = Vec::new();
        for v in &self.experiment.variants {
            let modes = if v.trim() == "batch-federated" {
                if self.experiment.clusters.is_empty() {
                    return Err(Error::Config(
                        "variant `batch-federated` needs experiment.clusters".into(),
                    ));
                }
                self.experiment
                    .clusters
                    .iter()
                    .map(|&k| {
                        if k == 0 {
                            Err(Error::Config("cluster counts must be >= 1".into()))
                        } else {
                            Ok(PipelineMode::BatchFederated(k))
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            } else {
                vec![v.parse()?]
            };
            for m in modes {
                if !out.contains(&m) {
                    out.push(m);
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Config("experiment.variants is empty".into()));
        }
        Ok(out)
    }

    /// Sets the fleet, split and federation seeds from one master seed.
    /// Derived seeds keep to 63 bits so they stay valid TOML integers.
    pub fn with_seed(mut self, seed: u64) -> Self {
        let derive = |salt| mix_seed(seed, salt) & i64::MAX as u64;
        self.data.synthetic.seed = derive(1);
        self.data.split_seed = derive(2);
        self.federation.seed = derive(3);
        self
    }

    /// Larger fleet and round counts for long runs on full-size data.
    pub fn paper_scale(mut self) -> Self {
        self.federation.rounds_autoencoder = 2000;
        self.federation.rounds_rul = 5000;
        self.data.synthetic.batteries = 124;
        self.data.synthetic.max_cycles = 2400;
        self.data.synthetic.life_min = Some(150);
        self.data.synthetic.life_max = Some(2300);
        self
    }
}
