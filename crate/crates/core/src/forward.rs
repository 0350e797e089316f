//! Closed-form forward process `dx = −c_t L_γ x dt + √(2c_t) σ dw`.
//!
//! Given `x_0`, `x_t ~ N(H_t x_0, σ²(I − H_t²) L_γ^{−1})` with
//! `H_t = V e^{−c̄_t(Λ+γI)} Vᵀ`. Every covariance is diagonal in the Laplacian
//! eigenbasis, so all of it is carried as per-mode vectors.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{GadError, Result};
use crate::graph::Spectrum;
use crate::schedule::DriftSchedule;

/// Gaussian whose covariance is `V diag(s) Vᵀ`.
#[derive(Debug, Clone)]
pub struct SpectralGaussian {
    mean: DVector<f64>,
    spectral_variances: DVector<f64>,
    spectrum: Arc<Spectrum>,
}

impl SpectralGaussian {
    pub fn new(mean: DVector<f64>, spectral_variances: DVector<f64>, spectrum: Arc<Spectrum>) -> Result<Self> {
        let n = spectrum.num_nodes();
        for v in [&mean, &spectral_variances] {
            if v.len() != n {
                return Err(GadError::DimensionMismatch { expected: n, got: v.len() });
            }
        }
        if spectral_variances.iter().any(|&s| !(s >= 0.0) || !s.is_finite()) {
            return Err(GadError::param("spectral variances must be finite and nonnegative"));
        }
        Ok(SpectralGaussian { mean, spectral_variances, spectrum })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn spectral_variances(&self) -> &DVector<f64> {
        &self.spectral_variances
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    /// Dense covariance matrix. Only meant for tests and diagnostics.
    pub fn covariance(&self) -> DMatrix<f64> {
        self.spectrum.spectral_matrix(&self.spectral_variances)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let n = self.mean.len();
        let z = DVector::from_fn(n, |i, _| self.spectral_variances[i].sqrt() * rng.sample::<f64, _>(StandardNormal));
        &self.mean + self.spectrum.eigenvectors() * z
    }

    pub fn sample_seeded(&self, seed: u64) -> DVector<f64> {
        self.sample(&mut ChaCha8Rng::seed_from_u64(seed))
    }

    /// `count` draws as columns of an `N × count` matrix.
    pub fn sample_columns<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> DMatrix<f64> {
        let n = self.mean.len();
        let std = self.spectral_variances.map(f64::sqrt);
        let z = DMatrix::from_fn(n, count, |i, _| std[i] * rng.sample::<f64, _>(StandardNormal));
        let mut out = self.spectrum.eigenvectors() * z;
        for mut col in out.column_iter_mut() {
            col += &self.mean;
        }
        out
    }
}

/// Graph heat diffusion with drift schedule, noise strength `σ` and
/// centering `γ`.
#[derive(Debug, Clone)]
pub struct ForwardModel {
    spectrum: Arc<Spectrum>,
    schedule: DriftSchedule,
    sigma: f64,
    gamma: f64,
}

impl ForwardModel {
    pub const DEFAULT_SIGMA: f64 = 1.0;
    pub const DEFAULT_GAMMA: f64 = 0.1;

    pub fn new(spectrum: Arc<Spectrum>, schedule: DriftSchedule, sigma: f64, gamma: f64) -> Result<Self> {
        schedule.validate()?;
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(GadError::param(format!("gamma must be positive, got {gamma}")));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(GadError::param(format!("sigma must be nonnegative, got {sigma}")));
        }
        Ok(ForwardModel { spectrum, schedule, sigma, gamma })
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn schedule(&self) -> &DriftSchedule {
        &self.schedule
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn horizon(&self) -> f64 {
        self.schedule.horizon()
    }

    /// Eigenvalues of `L_γ = L + γI`.
    pub fn shifted_eigenvalues(&self) -> DVector<f64> {
        self.spectrum.eigenvalues().add_scalar(self.gamma)
    }

    /// `h_i = e^{−c̄_t (λ_i + γ)}`, the eigenvalues of `H_t`.
    pub fn filter_diag(&self, t: f64) -> Result<DVector<f64>> {
        let cbar = self.schedule.integrated_drift(t)?;
        Ok(self.filter_diag_at(cbar))
    }

    /// Same as [`filter_diag`](Self::filter_diag) for a given `c̄`.
    pub fn filter_diag_at(&self, cbar: f64) -> DVector<f64> {
        self.shifted_eigenvalues().map(|l| (-cbar * l).exp())
    }

    /// `s_i = σ²(1 − h_i²)/(λ_i + γ)`.
    pub fn variances_at(&self, cbar: f64) -> DVector<f64> {
        let s2 = self.sigma * self.sigma;
        // -expm1(-2x) keeps precision for tiny c̄
        self.shifted_eigenvalues().map(|l| s2 * -(-2.0 * cbar * l).exp_m1() / l)
    }

    pub fn marginal(&self, x0: &DVector<f64>, t: f64) -> Result<SpectralGaussian> {
        self.spectrum.check_signal(x0)?;
        let cbar = self.schedule.integrated_drift(t)?;
        let h = self.filter_diag_at(cbar);
        let mean = self.spectrum.apply_spectral(&h, x0);
        SpectralGaussian::new(mean, self.variances_at(cbar), self.spectrum.clone())
    }

    /// `N(0, σ² L_γ^{−1})`, the limit as `c̄_t → ∞`.
    pub fn stationary(&self) -> SpectralGaussian {
        let s2 = self.sigma * self.sigma;
        let vars = self.shifted_eigenvalues().map(|l| s2 / l);
        SpectralGaussian::new(DVector::zeros(self.spectrum.num_nodes()), vars, self.spectrum.clone())
            .expect("stationary variances are nonnegative")
    }

    /// Euler–Maruyama simulation of the forward SDE from `x_0` to `T`.
    /// Validation oracle for the closed-form marginals; not used by the
    /// generative pipeline.
    pub fn euler_forward_simulate(&self, x0: &DVector<f64>, num_steps: usize, seed: u64) -> Result<DVector<f64>> {
        let x0m = DMatrix::from_column_slice(x0.len(), 1, x0.as_slice());
        let out = self.euler_forward_simulate_paths(&x0m, num_steps, 1, seed)?;
        Ok(out.column(0).into_owned())
    }

    /// Runs `num_paths` independent paths (columns of the result) from the
    /// same `x_0` (a single column).
    pub fn euler_forward_simulate_paths(
        &self,
        x0: &DMatrix<f64>,
        num_steps: usize,
        num_paths: usize,
        seed: u64,
    ) -> Result<DMatrix<f64>> {
        let n = self.spectrum.num_nodes();
        if x0.nrows() != n || x0.ncols() != 1 {
            return Err(GadError::DimensionMismatch { expected: n, got: x0.nrows() });
        }
        let mut x = DMatrix::from_fn(n, num_paths, |i, _| x0[(i, 0)]);
        if num_steps == 0 {
            return Ok(x);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dt = self.horizon() / num_steps as f64;
        let l = self.spectrum.laplacian();
        for step in 0..num_steps {
            let c = self.schedule.drift_unchecked(step as f64 * dt);
            let noise_scale = (2.0 * c * dt).sqrt() * self.sigma;
            let drift = (l * &x + &x * self.gamma) * (c * dt);
            x -= drift;
            for v in x.iter_mut() {
                *v += noise_scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        Ok(x)
    }
}
