//! JSON checkpoints of trained denoisers.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::denoiser::gcnn::{Coefficients, GcnnDenoiser};
use crate::error::{GadError, Result};
use crate::graph::Spectrum;
use crate::process::{Method, ProcessParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointArchitecture {
    pub layers: usize,
    #[serde(rename = "K")]
    pub order: usize,
    pub widths: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub method: Method,
    pub architecture: CheckpointArchitecture,
    /// `[layer][k][row][col]`.
    pub coefficients: Vec<Vec<Vec<Vec<f64>>>>,
    pub forward_model_params: ProcessParams,
    pub graph_hash: String,
}

impl Checkpoint {
    pub fn new(method: Method, denoiser: &GcnnDenoiser, params: ProcessParams, graph_hash: String) -> Self {
        let coefficients = denoiser
            .coefficients()
            .0
            .iter()
            .map(|taps| {
                taps.iter()
                    .map(|m| m.row_iter().map(|r| r.iter().copied().collect()).collect())
                    .collect()
            })
            .collect();
        Checkpoint {
            method,
            architecture: CheckpointArchitecture {
                layers: denoiser.num_layers(),
                order: denoiser.order(),
                widths: denoiser.widths().to_vec(),
            },
            coefficients,
            forward_model_params: params,
            graph_hash,
        }
    }

    /// Rebuilds the network on `spectrum`, refusing a graph whose hash differs
    /// from the one recorded at training time.
    pub fn to_denoiser(&self, spectrum: Arc<Spectrum>, graph_hash: &str) -> Result<GcnnDenoiser> {
        if graph_hash != self.graph_hash {
            return Err(GadError::HashMismatch { checkpoint: self.graph_hash.clone(), graph: graph_hash.to_string() });
        }
        let arch = &self.architecture;
        if arch.widths.len() != arch.layers + 1 || self.coefficients.len() != arch.layers {
            return Err(GadError::param("checkpoint layer count inconsistent with widths"));
        }
        let mut taps = Vec::with_capacity(arch.layers);
        for (layer, layer_taps) in self.coefficients.iter().enumerate() {
            let (rows, cols) = (arch.widths[layer], arch.widths[layer + 1]);
            let mut mats = Vec::with_capacity(layer_taps.len());
            for m in layer_taps {
                if m.len() != rows || m.iter().any(|r| r.len() != cols) {
                    return Err(GadError::param(format!("checkpoint layer {layer} has wrong tap shape")));
                }
                mats.push(DMatrix::from_fn(rows, cols, |i, j| m[i][j]));
            }
            taps.push(mats);
        }
        GcnnDenoiser::from_coefficients(
            spectrum,
            arch.order,
            arch.widths.clone(),
            Coefficients(taps),
            self.forward_model_params.schedule.horizon(),
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = self.to_json()?;
        std::fs::write(path, text).map_err(|e| GadError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| GadError::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}
