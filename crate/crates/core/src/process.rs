//! Linear forward diffusions that are diagonal in the Laplacian eigenbasis.
//!
//! GAD's heat diffusion has a different rate per graph frequency; the
//! variance-preserving (VPD) and variance-exploding (VED) baselines apply the
//! same scalar coefficients to every node and so are trivially diagonal in
//! any orthonormal basis. Writing all three as
//! `dx̃_i = −f_i(t) x̃_i dt + g(t) dw_i` lets training and reverse sampling share
//! one implementation.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::forward::{ForwardModel, SpectralGaussian};
use crate::graph::Spectrum;
use crate::schedule::DriftSchedule;

pub trait DiffusionProcess {
    fn spectrum(&self) -> &Arc<Spectrum>;

    fn horizon(&self) -> f64;

    /// Per-mode attenuation of the clean signal in the marginal mean.
    fn mean_factors(&self, t: f64) -> DVector<f64>;

    /// Per-mode marginal variances given `x_0`.
    fn variances(&self, t: f64) -> DVector<f64>;

    /// `f_i(t)`; the forward drift is `−V diag(f) Vᵀ x`.
    fn drift_rates(&self, t: f64) -> DVector<f64>;

    /// `g(t)²`.
    fn diffusion_sq(&self, t: f64) -> f64;

    /// Initial law of the reverse process.
    fn prior(&self) -> SpectralGaussian;

    /// Scale applied to `x_t` before it enters a learned denoiser, so the
    /// network input has roughly unit size whatever the noise level.
    /// Equals 1 for a variance-preserving process on unit-variance data.
    fn input_scale(&self, t: f64) -> f64 {
        let m = self.mean_factors(t);
        let s = self.variances(t);
        let n = m.len() as f64;
        (m.norm_squared() / n + s.sum() / n).sqrt().recip()
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(GadError::TimeOutOfRange { t, horizon });
        }
        Ok(())
    }

    fn marginal(&self, x0: &DVector<f64>, t: f64) -> Result<SpectralGaussian> {
        self.check_time(t)?;
        self.spectrum().check_signal(x0)?;
        let mean = self.spectrum().apply_spectral(&self.mean_factors(t), x0);
        SpectralGaussian::new(mean, self.variances(t), self.spectrum().clone())
    }
}

impl DiffusionProcess for ForwardModel {
    fn spectrum(&self) -> &Arc<Spectrum> {
        ForwardModel::spectrum(self)
    }

    fn horizon(&self) -> f64 {
        ForwardModel::horizon(self)
    }

    fn mean_factors(&self, t: f64) -> DVector<f64> {
        self.filter_diag_at(self.schedule().integrated_unchecked(t))
    }

    fn variances(&self, t: f64) -> DVector<f64> {
        self.variances_at(self.schedule().integrated_unchecked(t))
    }

    fn drift_rates(&self, t: f64) -> DVector<f64> {
        self.shifted_eigenvalues() * self.schedule().drift_unchecked(t)
    }

    fn diffusion_sq(&self, t: f64) -> f64 {
        2.0 * self.schedule().drift_unchecked(t) * self.sigma() * self.sigma()
    }

    fn prior(&self) -> SpectralGaussian {
        self.stationary()
    }
}

/// `dx = −½β_t x dt + √β_t dw` with `β` linear from `beta_min` to `beta_max`.
#[derive(Debug, Clone)]
pub struct VpProcess {
    spectrum: Arc<Spectrum>,
    beta_min: f64,
    beta_max: f64,
    horizon: f64,
}

impl VpProcess {
    pub const DEFAULT_BETA_MIN: f64 = 0.1;
    pub const DEFAULT_BETA_MAX: f64 = 20.0;

    pub fn new(spectrum: Arc<Spectrum>, beta_min: f64, beta_max: f64, horizon: f64) -> Result<Self> {
        if !(beta_min > 0.0 && beta_max >= beta_min && beta_max.is_finite()) {
            return Err(GadError::param(format!("VPD needs 0 < beta_min <= beta_max, got {beta_min}, {beta_max}")));
        }
        if !(horizon > 0.0) {
            return Err(GadError::param("horizon must be positive"));
        }
        Ok(VpProcess { spectrum, beta_min, beta_max, horizon })
    }

    pub fn beta(&self, t: f64) -> f64 {
        self.beta_min + (self.beta_max - self.beta_min) * t / self.horizon
    }

    /// `∫_0^t β_s ds`.
    pub fn integrated_beta(&self, t: f64) -> f64 {
        self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t * t / self.horizon
    }

    pub fn beta_range(&self) -> (f64, f64) {
        (self.beta_min, self.beta_max)
    }
}

impl DiffusionProcess for VpProcess {
    fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn mean_factors(&self, t: f64) -> DVector<f64> {
        DVector::from_element(self.spectrum.num_nodes(), (-0.5 * self.integrated_beta(t)).exp())
    }

    fn variances(&self, t: f64) -> DVector<f64> {
        DVector::from_element(self.spectrum.num_nodes(), -(-self.integrated_beta(t)).exp_m1())
    }

    fn drift_rates(&self, t: f64) -> DVector<f64> {
        DVector::from_element(self.spectrum.num_nodes(), 0.5 * self.beta(t))
    }

    fn diffusion_sq(&self, t: f64) -> f64 {
        self.beta(t)
    }

    /// The stationary law `N(0, I)`.
    fn prior(&self) -> SpectralGaussian {
        let n = self.spectrum.num_nodes();
        SpectralGaussian::new(DVector::zeros(n), DVector::from_element(n, 1.0), self.spectrum.clone())
            .expect("unit variances")
    }
}

/// `dx = √(d[σ_t²]/dt) dw` with `σ_t = σ_min (σ_max/σ_min)^{t/T}`.
#[derive(Debug, Clone)]
pub struct VeProcess {
    spectrum: Arc<Spectrum>,
    sigma_min: f64,
    sigma_max: f64,
    horizon: f64,
}

impl VeProcess {
    pub const DEFAULT_SIGMA_MIN: f64 = 0.01;
    pub const DEFAULT_SIGMA_MAX: f64 = 10.0;

    pub fn new(spectrum: Arc<Spectrum>, sigma_min: f64, sigma_max: f64, horizon: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_max > sigma_min && sigma_max.is_finite()) {
            return Err(GadError::param(format!("VED needs 0 < sigma_min < sigma_max, got {sigma_min}, {sigma_max}")));
        }
        if !(horizon > 0.0) {
            return Err(GadError::param("horizon must be positive"));
        }
        Ok(VeProcess { spectrum, sigma_min, sigma_max, horizon })
    }

    pub fn noise_level(&self, t: f64) -> f64 {
        self.sigma_min * (self.sigma_max / self.sigma_min).powf(t / self.horizon)
    }

    pub fn sigma_range(&self) -> (f64, f64) {
        (self.sigma_min, self.sigma_max)
    }
}

impl DiffusionProcess for VeProcess {
    fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    fn horizon(&self) -> f64 {
        self.horizon
    }

    fn mean_factors(&self, _t: f64) -> DVector<f64> {
        DVector::from_element(self.spectrum.num_nodes(), 1.0)
    }

    fn variances(&self, t: f64) -> DVector<f64> {
        let s = self.noise_level(t);
        DVector::from_element(self.spectrum.num_nodes(), s * s - self.sigma_min * self.sigma_min)
    }

    fn drift_rates(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(self.spectrum.num_nodes())
    }

    fn diffusion_sq(&self, t: f64) -> f64 {
        let s = self.noise_level(t);
        2.0 * s * s * (self.sigma_max / self.sigma_min).ln() / self.horizon
    }

    fn prior(&self) -> SpectralGaussian {
        let n = self.spectrum.num_nodes();
        SpectralGaussian::new(DVector::zeros(n), self.variances(self.horizon), self.spectrum.clone())
            .expect("variances are nonnegative")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gad,
    Vpd,
    Ved,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Gad, Method::Vpd, Method::Ved];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Gad => "gad",
            Method::Vpd => "vpd",
            Method::Ved => "ved",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = GadError;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gad" => Ok(Method::Gad),
            "vpd" => Ok(Method::Vpd),
            "ved" => Ok(Method::Ved),
            other => Err(GadError::param(format!("unknown method {other:?} (expected gad, vpd or ved)"))),
        }
    }
}

/// One of the three supported forward processes.
#[derive(Debug, Clone)]
pub enum Process {
    Gad(ForwardModel),
    Vp(VpProcess),
    Ve(VeProcess),
}

impl Process {
    pub fn method(&self) -> Method {
        match self {
            Process::Gad(_) => Method::Gad,
            Process::Vp(_) => Method::Vpd,
            Process::Ve(_) => Method::Ved,
        }
    }

    fn inner(&self) -> &dyn DiffusionProcess {
        match self {
            Process::Gad(p) => p,
            Process::Vp(p) => p,
            Process::Ve(p) => p,
        }
    }
}

impl DiffusionProcess for Process {
    fn spectrum(&self) -> &Arc<Spectrum> {
        self.inner().spectrum()
    }
    fn horizon(&self) -> f64 {
        self.inner().horizon()
    }
    fn mean_factors(&self, t: f64) -> DVector<f64> {
        self.inner().mean_factors(t)
    }
    fn variances(&self, t: f64) -> DVector<f64> {
        self.inner().variances(t)
    }
    fn drift_rates(&self, t: f64) -> DVector<f64> {
        self.inner().drift_rates(t)
    }
    fn diffusion_sq(&self, t: f64) -> f64 {
        self.inner().diffusion_sq(t)
    }
    fn prior(&self) -> SpectralGaussian {
        self.inner().prior()
    }
}

/// Serializable parameters of all three forward processes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProcessParams {
    pub sigma: f64,
    pub gamma: f64,
    pub schedule: DriftSchedule,
    pub vpd: VpdParams,
    pub ved: VedParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VpdParams {
    pub beta_min: f64,
    pub beta_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VedParams {
    pub sigma_min: f64,
    pub sigma_max: f64,
}

impl Default for ProcessParams {
    fn default() -> Self {
        ProcessParams {
            sigma: ForwardModel::DEFAULT_SIGMA,
            gamma: ForwardModel::DEFAULT_GAMMA,
            schedule: DriftSchedule::default(),
            vpd: VpdParams::default(),
            ved: VedParams::default(),
        }
    }
}

impl Default for VpdParams {
    fn default() -> Self {
        VpdParams { beta_min: VpProcess::DEFAULT_BETA_MIN, beta_max: VpProcess::DEFAULT_BETA_MAX }
    }
}

impl Default for VedParams {
    fn default() -> Self {
        VedParams { sigma_min: VeProcess::DEFAULT_SIGMA_MIN, sigma_max: VeProcess::DEFAULT_SIGMA_MAX }
    }
}

impl ProcessParams {
    /// Builds the process for `method`. Baselines share the schedule's horizon.
    pub fn build(&self, method: Method, spectrum: Arc<Spectrum>) -> Result<Process> {
        let horizon = self.schedule.horizon();
        Ok(match method {
            Method::Gad => Process::Gad(ForwardModel::new(spectrum, self.schedule, self.sigma, self.gamma)?),
            Method::Vpd => Process::Vp(VpProcess::new(spectrum, self.vpd.beta_min, self.vpd.beta_max, horizon)?),
            Method::Ved => Process::Ve(VeProcess::new(spectrum, self.ved.sigma_min, self.ved.sigma_max, horizon)?),
        })
    }
}

/// Draws `x_t` for each column of `x0` at the matching time in `times`.
pub fn sample_marginals<P: DiffusionProcess + ?Sized, R: Rng + ?Sized>(
    process: &P,
    x0: &DMatrix<f64>,
    times: &[f64],
    rng: &mut R,
) -> DMatrix<f64> {
    let spectrum = process.spectrum();
    let coeffs = spectrum.gft_columns(x0);
    let mut noisy = DMatrix::zeros(coeffs.nrows(), coeffs.ncols());
    for (j, &t) in times.iter().enumerate() {
        let h = process.mean_factors(t);
        let s = process.variances(t);
        for i in 0..coeffs.nrows() {
            let z: f64 = rng.sample(rand_distr::StandardNormal);
            noisy[(i, j)] = h[i] * coeffs[(i, j)] + s[i].sqrt() * z;
        }
    }
    spectrum.igft_columns(&noisy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use approx::assert_abs_diff_eq;

    fn spectrum() -> Arc<Spectrum> {
        let g = Graph::new(DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.])).unwrap();
        Arc::new(Spectrum::from_graph(&g).unwrap())
    }

    #[test]
    fn vp_marginal_contract() {
        let p = VpProcess::new(spectrum(), 0.1, 20.0, 1.0).unwrap();
        let t = 0.3;
        let int = 0.1 * t + 0.5 * 19.9 * t * t;
        assert_abs_diff_eq!(p.mean_factors(t)[0], (-0.5 * int).exp(), epsilon = 1e-15);
        assert_abs_diff_eq!(p.variances(t)[2], 1.0 - (-int).exp(), epsilon = 1e-15);
        let x0 = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        let m = p.marginal(&x0, t).unwrap();
        assert!((m.mean() - &x0 * (-0.5 * int).exp()).amax() < 1e-14);
    }

    #[test]
    fn ve_marginal_contract() {
        let p = VeProcess::new(spectrum(), 0.01, 10.0, 1.0).unwrap();
        let t = 0.6;
        let s = 0.01 * 1000f64.powf(t);
        assert_abs_diff_eq!(p.variances(t)[1], s * s - 1e-4, epsilon = 1e-12);
        assert_eq!(p.variances(0.0)[0], 0.0);
        // g² = d σ_t² / dt, checked by central differences
        let eps = 1e-6;
        let fd = (p.variances(t + eps)[0] - p.variances(t - eps)[0]) / (2.0 * eps);
        assert!((fd - p.diffusion_sq(t)).abs() / fd < 1e-8);
    }

    #[test]
    fn gad_rates_match_schedule() {
        use crate::schedule::DriftSchedule;
        let sp = spectrum();
        let m = ForwardModel::new(sp.clone(), DriftSchedule::default(), 0.7, 0.1).unwrap();
        let t = 0.4;
        let c = DriftSchedule::default().drift_at(t).unwrap();
        let rates = m.drift_rates(t);
        for i in 0..3 {
            assert_abs_diff_eq!(rates[i], c * (sp.eigenvalues()[i] + 0.1), epsilon = 1e-14);
        }
        assert_abs_diff_eq!(m.diffusion_sq(t), 2.0 * c * 0.49, epsilon = 1e-14);
    }

    #[test]
    fn input_scale_normalizes_noisy_input() {
        let vp = VpProcess::new(spectrum(), 0.1, 20.0, 1.0).unwrap();
        assert_abs_diff_eq!(vp.input_scale(0.8), 1.0, epsilon = 1e-14);
        let ve = VeProcess::new(spectrum(), 0.01, 10.0, 1.0).unwrap();
        assert_abs_diff_eq!(ve.input_scale(1.0), (1.0 + 100.0 - 1e-4f64).sqrt().recip(), epsilon = 1e-12);
        assert_eq!(ve.input_scale(0.0), 1.0);
    }

    #[test]
    fn method_parsing() {
        assert_eq!("VPD".parse::<Method>().unwrap(), Method::Vpd);
        assert!("ddpm".parse::<Method>().is_err());
        assert_eq!(serde_json::to_string(&Method::Ved).unwrap(), "\"ved\"");
    }
}
