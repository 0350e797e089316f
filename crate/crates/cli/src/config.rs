//! Run configuration: one JSON document, defaults for every field, scalar
//! overrides from command-line flags.

use std::path::{Path, PathBuf};

use gad_core::denoiser::{Architecture, TrainConfig};
use gad_core::sampler::SamplerConfig;
use gad_core::{GadError, Method, ProcessParams, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum GraphSource {
    Sbm { nodes_per_community: usize, num_communities: usize, p_in: f64, p_out: f64 },
    /// Pre-built graph and signal sets; the files must already be clean.
    Csv { adjacency: PathBuf, train: PathBuf, test: PathBuf },
}

impl Default for GraphSource {
    fn default() -> Self {
        GraphSource::Sbm { nodes_per_community: 10, num_communities: 2, p_in: 0.6, p_out: 0.1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub num_train: usize,
    pub num_test: usize,
    /// Strength of the `(I + τL)^{−1}` smoother.
    pub tau: f64,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig { num_train: 500, num_test: 500, tau: 5.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub momentum: f64,
    pub num_iterations: usize,
    pub batch_size: usize,
    pub t_min_fraction: f64,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            learning_rate: d.learning_rate,
            momentum: d.momentum,
            num_iterations: d.num_iterations,
            batch_size: d.batch_size,
            t_min_fraction: d.t_min_fraction,
        }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            momentum: self.momentum,
            num_iterations: self.num_iterations,
            batch_size: self.batch_size,
            t_min_fraction: self.t_min_fraction,
            seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerSettings {
    /// Step count used by `sample`.
    pub num_steps: usize,
    pub num_samples: usize,
    pub final_denoise: bool,
    /// Step counts visited by `sweep`.
    pub sweep_steps: Vec<usize>,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings { num_steps: 100, num_samples: 500, final_denoise: true, sweep_steps: vec![10, 50, 250] }
    }
}

impl SamplerSettings {
    pub fn config(&self, num_steps: usize, seed: u64) -> SamplerConfig {
        SamplerConfig { num_steps, seed, final_denoise: self.final_denoise }
    }
}

/// Seeds of every random stage, derived from one master seed by fixed offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub graph: u64,
    pub train_signals: u64,
    pub test_signals: u64,
    pub init: u64,
    pub training: u64,
    pub sampling: u64,
}

impl Seeds {
    pub fn derive(master: u64) -> Self {
        Seeds {
            graph: master,
            train_signals: master.wrapping_add(1),
            test_signals: master.wrapping_add(2),
            init: master.wrapping_add(3),
            training: master.wrapping_add(4),
            sampling: master.wrapping_add(5),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub graph: GraphSource,
    pub data: DataConfig,
    pub process: ProcessParams,
    pub architecture: Architecture,
    pub train: TrainSettings,
    pub sampler: SamplerSettings,
    pub method: Method,
    pub methods: Vec<Method>,
    pub seed: u64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            graph: GraphSource::default(),
            data: DataConfig::default(),
            process: ProcessParams::default(),
            architecture: Architecture::default(),
            train: TrainSettings::default(),
            sampler: SamplerSettings::default(),
            method: Method::Gad,
            methods: Method::ALL.to_vec(),
            seed: 0,
            out: PathBuf::from("runs/default"),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GadError::Io { path: path.to_path_buf(), source: e })?;
        Self::from_json(&text)
    }

    /// The file if given, else defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn seeds(&self) -> Seeds {
        Seeds::derive(self.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if let GraphSource::Csv { adjacency, train, test } = &self.graph {
            for p in [adjacency, train, test] {
                if !p.exists() {
                    return Err(GadError::Io {
                        path: p.clone(),
                        source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
                    });
                }
            }
        }
        if self.data.num_train == 0 || self.data.num_test == 0 {
            return Err(GadError::InvalidParameter("dataset sizes must be positive".into()));
        }
        if self.sampler.num_steps == 0 || self.sampler.sweep_steps.contains(&0) {
            return Err(GadError::InvalidParameter("step counts must be at least 1".into()));
        }
        if self.sampler.num_samples == 0 {
            return Err(GadError::InvalidParameter("num_samples must be positive".into()));
        }
        if self.methods.is_empty() {
            return Err(GadError::InvalidParameter("at least one method is required".into()));
        }
        self.process.schedule.validate()?;
        self.train.with_seed(0).validate()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
