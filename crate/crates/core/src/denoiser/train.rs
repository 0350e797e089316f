use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::SignalDataset;
use crate::denoiser::gcnn::GcnnDenoiser;
use crate::error::{GadError, Result};
use crate::process::{sample_marginals, DiffusionProcess};

pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub num_iterations: usize,
    pub batch_size: usize,
    /// Training times are drawn from `U(t_min_fraction·T, T)`.
    pub t_min_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            momentum: 0.9,
            num_iterations: 5000,
            batch_size: 32,
            t_min_fraction: 1e-3,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(GadError::param(format!("learning rate must be positive, got {}", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(GadError::param(format!("momentum must lie in [0,1), got {}", self.momentum)));
        }
        if self.batch_size == 0 {
            return Err(GadError::param("batch size must be positive"));
        }
        if !(self.t_min_fraction > 0.0 && self.t_min_fraction < 1.0) {
            return Err(GadError::param("t_min_fraction must lie in (0,1)"));
        }
        Ok(())
    }
}

/// Per-iteration batch MMSE.
#[derive(Debug, Clone, PartialEq)]
pub struct LossTrace(pub Vec<f64>);

impl LossTrace {
    /// Mean of the first `window` entries.
    pub fn head_mean(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.0.len().max(1));
        self.0.iter().take(w).sum::<f64>() / w as f64
    }

    /// Mean of the last `window` entries.
    pub fn tail_mean(&self, window: usize) -> f64 {
        let w = window.clamp(1, self.0.len().max(1));
        self.0.iter().rev().take(w).sum::<f64>() / w as f64
    }
}

/// Minimizes `E‖x_0 − g_Θ(x_t, L, t)‖²` by stochastic gradient descent with
/// momentum: each step samples a batch of `x_0` from the dataset, times from
/// `U(t_min, T)` and `x_t` from the forward marginal.
pub fn train<P: DiffusionProcess + ?Sized>(
    denoiser: &mut GcnnDenoiser,
    dataset: &SignalDataset,
    process: &P,
    config: &TrainConfig,
) -> Result<LossTrace> {
    config.validate()?;
    let n = denoiser.spectrum().num_nodes();
    dataset.check_graph(n)?;
    if process.spectrum().num_nodes() != n {
        return Err(GadError::DimensionMismatch { expected: n, got: process.spectrum().num_nodes() });
    }
    let horizon = process.horizon();
    let t_min = config.t_min_fraction * horizon;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut velocity = denoiser.coefficients().zeros_like();
    let mut trace = Vec::with_capacity(config.num_iterations);
    let b = config.batch_size;

    for iteration in 0..config.num_iterations {
        let mut x0 = DMatrix::zeros(n, b);
        for j in 0..b {
            let idx = rng.random_range(0..dataset.len());
            x0.set_column(j, &dataset.signals().row(idx).transpose());
        }
        let times: Vec<f64> = (0..b).map(|_| rng.random_range(t_min..=horizon)).collect();
        let xt = sample_marginals(process, &x0, &times, &mut rng);

        let mut grad = denoiser.coefficients().zeros_like();
        let mut loss = 0.0;
        for j in 0..b {
            let target = x0.column(j).into_owned();
            let input = xt.column(j) * process.input_scale(times[j]);
            let (half, g) = denoiser.gradient(&input, times[j], &target)?;
            loss += 2.0 * half;
            grad.axpy(1.0, &g);
        }
        loss /= b as f64;
        if !loss.is_finite() || loss > DIVERGENCE_LIMIT {
            return Err(GadError::Diverged { iteration, loss });
        }
        trace.push(loss);

        // ∇ of the batch mean of ‖·‖² is 2/B times the summed half-gradients
        velocity.scale(config.momentum);
        velocity.axpy(2.0 / b as f64, &grad);
        denoiser.coefficients_mut().axpy(-config.learning_rate, &velocity);
    }
    Ok(LossTrace(trace))
}
