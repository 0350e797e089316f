//! Score evaluation via Tweedie's formula and reverse-time Euler–Maruyama
//! sampling.
//!
//! For a process written per graph frequency as `dx̃ = −f(t) x̃ dt + g(t) dw`,
//! the reverse SDE integrated from `T` down to `t_min` is discretized as
//!
//! ```text
//! x ← x + [V diag(f) Vᵀ x + g² ∇log p_t(x)] Δ + g √Δ z
//! ```
//!
//! which for GAD reads `x ← x + [c_t L_γ x + 2c_t σ² score] Δ + √(2c_tΔ) σ z`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::denoiser::GcnnDenoiser;
use crate::error::{GadError, Result};
use crate::graph::Spectrum;
use crate::process::{DiffusionProcess, Method, Process};

pub const DEFAULT_T_MIN_FRACTION: f64 = 1e-3;

/// Known Gaussian data law `N(m_0, S_0)`, for which every marginal and score
/// is available in closed form.
#[derive(Debug, Clone)]
pub struct GaussianOracle {
    mean: DVector<f64>,
    covariance: DMatrix<f64>,
    spectral_mean: DVector<f64>,
    spectral_covariance: DMatrix<f64>,
}

impl GaussianOracle {
    pub fn new(spectrum: &Spectrum, mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        let n = spectrum.num_nodes();
        if mean.len() != n {
            return Err(GadError::DimensionMismatch { expected: n, got: mean.len() });
        }
        if covariance.shape() != (n, n) {
            return Err(GadError::DimensionMismatch { expected: n, got: covariance.nrows() });
        }
        if (&covariance - covariance.transpose()).amax() > 1e-12 {
            return Err(GadError::param("oracle covariance must be symmetric"));
        }
        let min_eig = covariance.clone().symmetric_eigenvalues().min();
        if min_eig < -1e-10 * covariance.amax().max(1.0) {
            return Err(GadError::param(format!("oracle covariance not PSD (min eigenvalue {min_eig})")));
        }
        let v = spectrum.eigenvectors();
        let spectral_mean = v.tr_mul(&mean);
        let spectral_covariance = v.tr_mul(&covariance) * v;
        Ok(GaussianOracle { mean, covariance, spectral_mean, spectral_covariance })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.covariance
    }

    /// Covariance of `x_t` in the eigenbasis: `diag(h) S̃_0 diag(h) + diag(s)`.
    pub fn spectral_marginal_covariance<P: DiffusionProcess + ?Sized>(&self, process: &P, t: f64) -> DMatrix<f64> {
        let h = process.mean_factors(t);
        let s = process.variances(t);
        let n = h.len();
        DMatrix::from_fn(n, n, |i, j| {
            h[i] * self.spectral_covariance[(i, j)] * h[j] + if i == j { s[i] } else { 0.0 }
        })
    }

    /// Returns `(x̃ − h∘m̃_0, C̃^{−1}(x̃ − h∘m̃_0))` for every column.
    fn whiten<P: DiffusionProcess + ?Sized>(&self, process: &P, x: &DMatrix<f64>, t: f64) -> Result<(DMatrix<f64>, DVector<f64>, DMatrix<f64>)> {
        let h = process.mean_factors(t);
        let cov = self.spectral_marginal_covariance(process, t);
        let chol = cov.cholesky().ok_or(GadError::SingularCovariance)?;
        let mut centered = process.spectrum().gft_columns(x);
        let shift = h.component_mul(&self.spectral_mean);
        for mut col in centered.column_iter_mut() {
            col -= &shift;
        }
        let solved = chol.solve(&centered);
        Ok((centered, h, solved))
    }

    /// `∇ log N(x; H m_0, H S_0 Hᵀ + Σ_t)` for every column of `x`.
    pub fn score_columns<P: DiffusionProcess + ?Sized>(&self, process: &P, x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        let (_, _, solved) = self.whiten(process, x, t)?;
        Ok(process.spectrum().igft_columns(&(-solved)))
    }

    /// `E[x_0 | x_t] = m_0 + S_0 H (H S_0 H + Σ_t)^{−1}(x_t − H m_0)`.
    pub fn posterior_mean_columns<P: DiffusionProcess + ?Sized>(&self, process: &P, x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        let (_, h, solved) = self.whiten(process, x, t)?;
        let mut weighted = solved;
        for mut col in weighted.column_iter_mut() {
            col.component_mul_assign(&h);
        }
        let mut spectral = &self.spectral_covariance * weighted;
        for mut col in spectral.column_iter_mut() {
            col += &self.spectral_mean;
        }
        Ok(process.spectrum().igft_columns(&spectral))
    }
}

#[derive(Debug, Clone)]
pub enum Estimator {
    Gcnn(GcnnDenoiser),
    Oracle(GaussianOracle),
}

/// Score of the noisy marginals of `process`.
#[derive(Debug, Clone)]
pub struct ScoreModel {
    process: Process,
    estimator: Estimator,
    t_min: f64,
}

impl ScoreModel {
    pub fn gcnn_tweedie(process: Process, denoiser: GcnnDenoiser) -> Result<Self> {
        if denoiser.spectrum().num_nodes() != process.spectrum().num_nodes() {
            return Err(GadError::DimensionMismatch {
                expected: process.spectrum().num_nodes(),
                got: denoiser.spectrum().num_nodes(),
            });
        }
        let t_min = DEFAULT_T_MIN_FRACTION * process.horizon();
        Ok(ScoreModel { process, estimator: Estimator::Gcnn(denoiser), t_min })
    }

    pub fn gaussian_oracle(process: Process, oracle: GaussianOracle) -> Self {
        let t_min = DEFAULT_T_MIN_FRACTION * process.horizon();
        ScoreModel { process, estimator: Estimator::Oracle(oracle), t_min }
    }

    pub fn with_t_min(mut self, t_min: f64) -> Result<Self> {
        if !(t_min > 0.0 && t_min < self.process.horizon()) {
            return Err(GadError::param(format!("t_min must lie in (0, T), got {t_min}")));
        }
        self.t_min = t_min;
        Ok(self)
    }

    pub fn process(&self) -> &Process {
        &self.process
    }

    pub fn estimator(&self) -> &Estimator {
        &self.estimator
    }

    pub fn t_min(&self) -> f64 {
        self.t_min
    }

    fn check_t(&self, t: f64) -> Result<()> {
        // allow for rounding in the time grid
        if t < self.t_min * (1.0 - 1e-12) {
            return Err(GadError::BelowTimeFloor { t, t_min: self.t_min });
        }
        self.process.check_time(t)
    }

    /// Estimates of `E[x_0 | x_t]` for every column.
    pub fn posterior_mean_columns(&self, x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        self.check_t(t)?;
        match &self.estimator {
            Estimator::Gcnn(net) => {
                let scale = self.process.input_scale(t);
                let mut out = DMatrix::zeros(x.nrows(), x.ncols());
                for (j, col) in x.column_iter().enumerate() {
                    out.set_column(j, &net.predict(&(col * scale), t)?);
                }
                Ok(out)
            }
            Estimator::Oracle(oracle) => oracle.posterior_mean_columns(&self.process, x, t),
        }
    }

    pub fn score_columns(&self, x: &DMatrix<f64>, t: f64) -> Result<DMatrix<f64>> {
        self.check_t(t)?;
        match &self.estimator {
            Estimator::Gcnn(_) => {
                let estimate = self.posterior_mean_columns(x, t)?;
                Ok(tweedie_score_columns(&self.process, x, &estimate, t))
            }
            Estimator::Oracle(oracle) => oracle.score_columns(&self.process, x, t),
        }
    }

    pub fn score(&self, x: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.process.spectrum().check_signal(x)?;
        let xm = DMatrix::from_column_slice(x.len(), 1, x.as_slice());
        Ok(self.score_columns(&xm, t)?.column(0).into_owned())
    }
}

/// `Σ_t^{−1}(H_t x̂_0 − x_t)` computed per graph frequency.
pub fn tweedie_score_columns<P: DiffusionProcess + ?Sized>(
    process: &P,
    x: &DMatrix<f64>,
    estimate: &DMatrix<f64>,
    t: f64,
) -> DMatrix<f64> {
    let spectrum = process.spectrum();
    let h = process.mean_factors(t);
    let s = process.variances(t);
    let xs = spectrum.gft_columns(x);
    let es = spectrum.gft_columns(estimate);
    let spectral = DMatrix::from_fn(xs.nrows(), xs.ncols(), |i, j| (h[i] * es[(i, j)] - xs[(i, j)]) / s[i]);
    spectrum.igft_columns(&spectral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub num_steps: usize,
    pub seed: u64,
    /// Return the denoiser's estimate at `t_min` instead of the last state.
    pub final_denoise: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig { num_steps: 100, seed: 0, final_denoise: true }
    }
}

/// Generates `num_samples` signals (columns of the result).
pub fn sample_batch(model: &ScoreModel, config: &SamplerConfig, num_samples: usize) -> Result<DMatrix<f64>> {
    if config.num_steps == 0 {
        return Err(GadError::param("num_steps must be at least 1"));
    }
    let process = model.process();
    let spectrum = process.spectrum();
    let n = spectrum.num_nodes();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut x = process.prior().sample_columns(&mut rng, num_samples);

    let t_min = model.t_min();
    let dt = (process.horizon() - t_min) / config.num_steps as f64;
    for (step, j) in (1..=config.num_steps).rev().enumerate() {
        let t = t_min + j as f64 * dt;
        let score = model.score_columns(&x, t)?;
        let drift = spectrum.apply_spectral_columns(&process.drift_rates(t), &x);
        let g2 = process.diffusion_sq(t);
        let noise_scale = (g2 * dt).sqrt();
        x += (drift + score * g2) * dt;
        for v in x.iter_mut() {
            *v += noise_scale * rng.sample::<f64, _>(StandardNormal);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GadError::NonFinite { step: step + 1 });
        }
    }
    debug_assert_eq!(x.nrows(), n);
    if config.final_denoise {
        x = model.posterior_mean_columns(&x, t_min)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GadError::NonFinite { step: config.num_steps + 1 });
        }
    }
    Ok(x)
}

/// One reverse-time Euler–Maruyama sample.
pub fn euler_maruyama_reverse(model: &ScoreModel, config: &SamplerConfig) -> Result<DVector<f64>> {
    Ok(sample_batch(model, config, 1)?.column(0).into_owned())
}

fn expect_method(model: &ScoreModel, method: Method) -> Result<()> {
    if model.process().method() != method {
        return Err(GadError::param(format!("score model is for {}, not {method}", model.process().method())));
    }
    Ok(())
}

/// Reverse sampling under the graph-agnostic variance-preserving baseline.
pub fn vpd_reverse(model: &ScoreModel, config: &SamplerConfig, num_samples: usize) -> Result<DMatrix<f64>> {
    expect_method(model, Method::Vpd)?;
    sample_batch(model, config, num_samples)
}

/// Reverse sampling under the graph-agnostic variance-exploding baseline.
pub fn ved_reverse(model: &ScoreModel, config: &SamplerConfig, num_samples: usize) -> Result<DMatrix<f64>> {
    expect_method(model, Method::Ved)?;
    sample_batch(model, config, num_samples)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::{Coefficients, GcnnDenoiser};
    use crate::forward::ForwardModel;
    use crate::graph::Graph;
    use crate::schedule::DriftSchedule;
    use std::sync::Arc;

    fn spectrum() -> Arc<Spectrum> {
        let a = DMatrix::from_row_slice(4, 4, &[0., 1., 1., 0., 1., 0., 1., 0., 1., 1., 0., 1., 0., 0., 1., 0.]);
        Arc::new(Spectrum::from_graph(&Graph::new(a).unwrap()).unwrap())
    }

    fn gad(s: Arc<Spectrum>, sigma: f64) -> Process {
        Process::Gad(ForwardModel::new(s, DriftSchedule::default(), sigma, 0.1).unwrap())
    }

    #[test]
    fn point_mass_oracle_score() {
        let s = spectrum();
        let p = gad(s.clone(), 1.0);
        let oracle = GaussianOracle::new(&s, DVector::zeros(4), DMatrix::zeros(4, 4)).unwrap();
        let model = ScoreModel::gaussian_oracle(p.clone(), oracle);
        let x = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.1]);
        let t = 0.4;
        let score = model.score(&x, t).unwrap();
        let var = p.variances(t);
        let want = s.apply_spectral(&var.map(|v| -1.0 / v), &x);
        assert!((score - want).amax() < 1e-10);
    }

    #[test]
    fn oracle_score_vanishes_at_mode() {
        let s = spectrum();
        let p = gad(s.clone(), 1.0);
        let m0 = DVector::from_vec(vec![1.0, 1.0, -1.0, -1.0]);
        let oracle = GaussianOracle::new(&s, m0.clone(), DMatrix::identity(4, 4) * 0.25).unwrap();
        let model = ScoreModel::gaussian_oracle(p.clone(), oracle);
        let t = 0.3;
        let mode = s.apply_spectral(&p.mean_factors(t), &m0);
        assert!(model.score(&mode, t).unwrap().amax() < 1e-12);
    }

    #[test]
    fn oracle_score_equals_tweedie_with_posterior_mean() {
        let s = spectrum();
        let p = gad(s.clone(), 0.8);
        let m0 = DVector::from_vec(vec![1.0, 0.3, -1.0, -0.2]);
        let mut s0 = DMatrix::from_fn(4, 4, |i, j| 0.1 / (1.0 + (i as f64 - j as f64).abs()));
        s0 += DMatrix::identity(4, 4) * 0.2;
        let oracle = GaussianOracle::new(&s, m0, s0).unwrap();
        let x = DMatrix::from_column_slice(4, 2, &[0.2, -0.4, 1.0, 0.0, 1.5, 0.3, -0.9, 2.2]);
        for t in [0.01, 0.2, 0.9] {
            let direct = oracle.score_columns(&p, &x, t).unwrap();
            let post = oracle.posterior_mean_columns(&p, &x, t).unwrap();
            let tweedie = tweedie_score_columns(&p, &x, &post, t);
            assert!((direct - &tweedie).amax() < 1e-8 * (1.0 + tweedie.amax()), "t={t}");
        }
    }

    #[test]
    fn identity_denoiser_score_limit_near_zero_time() {
        let s = spectrum();
        let p = gad(s.clone(), 1.0);
        let x = DVector::from_vec(vec![0.5, -1.0, 2.0, 0.1]);
        let xm = DMatrix::from_column_slice(4, 1, x.as_slice());
        // H_t x − x → 0, but Σ_t^{-1} blows up at the same rate: the limit is −L_γ x / (2σ²)
        let tiny = 1e-8;
        let score = tweedie_score_columns(&p, &xm, &xm, tiny).column(0).into_owned();
        let h = p.mean_factors(tiny);
        let residual = s.apply_spectral(&h.map(|h| h - 1.0), &x);
        assert!(residual.amax() < 1e-6);
        let lg = s.laplacian() + DMatrix::identity(4, 4) * 0.1;
        let limit = -(lg * &x) / 2.0;
        assert!((score - limit).amax() < 1e-5);
    }

    #[test]
    fn gcnn_input_is_rescaled() {
        let s = spectrum();
        let p = gad(s.clone(), 1.0);
        let mut coeffs = Coefficients::zeros(&[2, 1], 1);
        coeffs.0[0][0][(0, 0)] = 1.0;
        let net = GcnnDenoiser::from_coefficients(s, 1, vec![2, 1], coeffs, 1.0).unwrap();
        let model = ScoreModel::gcnn_tweedie(p, net).unwrap();
        let x = DMatrix::from_column_slice(4, 1, &[0.5, -1.0, 2.0, 0.1]);
        let t = 0.7;
        let k = model.process().input_scale(t);
        assert!(k < 1.0);
        let est = model.posterior_mean_columns(&x, t).unwrap();
        assert!((est - &x * k).amax() < 1e-14);
    }

    #[test]
    fn rejects_time_below_floor() {
        let s = spectrum();
        let oracle = GaussianOracle::new(&s, DVector::zeros(4), DMatrix::zeros(4, 4)).unwrap();
        let model = ScoreModel::gaussian_oracle(gad(s, 1.0), oracle);
        assert!(matches!(model.score(&DVector::zeros(4), 1e-4), Err(GadError::BelowTimeFloor { .. })));
    }

    #[test]
    fn deterministic_reverse_heat_flow() {
        // σ = 0 makes the prior a point mass; feed a nonzero start by hand
        let s = spectrum();
        let fm = ForwardModel::new(s.clone(), DriftSchedule::default(), 0.0, 0.1).unwrap();
        let p = Process::Gad(fm);
        let x0 = DVector::from_vec(vec![1.0, -0.5, 0.2, 0.0]);
        let t = 0.5;
        let dt = 0.01;
        let c = DriftSchedule::default().drift_at(t).unwrap();
        let drift = s.apply_spectral(&p.drift_rates(t), &x0);
        let stepped = &x0 + drift * dt;
        let lg = s.laplacian() + DMatrix::identity(4, 4) * 0.1;
        let want = (DMatrix::identity(4, 4) + lg * (c * dt)) * &x0;
        assert!((stepped - want).amax() < 1e-14);
        assert_eq!(p.diffusion_sq(t), 0.0);
    }

    #[test]
    fn fixed_seed_reproducible() {
        let s = spectrum();
        let oracle = GaussianOracle::new(&s, DVector::from_element(4, 0.5), DMatrix::identity(4, 4) * 0.25).unwrap();
        let model = ScoreModel::gaussian_oracle(gad(s, 1.0), oracle);
        let cfg = SamplerConfig { num_steps: 20, seed: 9, final_denoise: true };
        assert_eq!(euler_maruyama_reverse(&model, &cfg).unwrap(), euler_maruyama_reverse(&model, &cfg).unwrap());
        assert!(sample_batch(&model, &SamplerConfig { num_steps: 0, ..cfg }, 1).is_err());
        assert!(vpd_reverse(&model, &cfg, 1).is_err());
    }
}
