//! Tikhonov-regularized graph deconvolution of `x_t = H_t x_0 + e`.
//!
//! The minimizer of `‖x_t − H_t x_0‖²_{Σ_t^{−1}} + α‖x_0‖²_L` is the graph
//! filter `(H_tᵀΣ_t^{−1}H_t + αL)^{−1}H_tᵀΣ_t^{−1}`, whose response at graph
//! frequency `λ` is
//!
//! ```text
//!            e^{(λ+γ)c̄}
//! h(λ) = ─────────────────────────────────────
//!        1 + ασ² λ/(λ+γ) (e^{2(λ+γ)c̄} − 1)
//! ```

use nalgebra::{DMatrix, DVector};

use crate::error::{GadError, Result};
use crate::forward::ForwardModel;

#[derive(Debug, Clone)]
pub struct ClosedFormDenoiser {
    model: ForwardModel,
    alpha_reg: f64,
}

/// Response of the closed-form filter at one frequency for a given `c̄`.
pub fn frequency_response_at(lambda: f64, cbar: f64, gamma: f64, sigma: f64, alpha_reg: f64) -> f64 {
    let a = (lambda + gamma) * cbar;
    let weight = alpha_reg * sigma * sigma * lambda / (lambda + gamma);
    // e^a / (1 + w(e^{2a} − 1)) rewritten as 1 / (e^{−a} + 2w sinh a)
    1.0 / ((-a).exp() + 2.0 * weight * a.sinh())
}

impl ClosedFormDenoiser {
    pub fn new(model: ForwardModel, alpha_reg: f64) -> Result<Self> {
        if !(alpha_reg >= 0.0 && alpha_reg.is_finite()) {
            return Err(GadError::param(format!("alpha_reg must be >= 0, got {alpha_reg}")));
        }
        Ok(ClosedFormDenoiser { model, alpha_reg })
    }

    pub fn model(&self) -> &ForwardModel {
        &self.model
    }

    pub fn alpha_reg(&self) -> f64 {
        self.alpha_reg
    }

    pub fn frequency_response(&self, lambda: f64, t: f64) -> Result<f64> {
        if !(lambda >= 0.0) {
            return Err(GadError::param(format!("frequency must be >= 0, got {lambda}")));
        }
        let cbar = self.model.schedule().integrated_drift(t)?;
        Ok(frequency_response_at(lambda, cbar, self.model.gamma(), self.model.sigma(), self.alpha_reg))
    }

    fn positive_cbar(&self, t: f64) -> Result<f64> {
        let cbar = self.model.schedule().integrated_drift(t)?;
        if cbar <= 0.0 || self.model.sigma() == 0.0 {
            return Err(GadError::SingularCovariance);
        }
        Ok(cbar)
    }

    /// Spectral evaluation `V diag(h(λ_i)) Vᵀ x_t`.
    pub fn denoise(&self, x_t: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let spectrum = self.model.spectrum();
        spectrum.check_signal(x_t)?;
        let cbar = self.positive_cbar(t)?;
        let (gamma, sigma) = (self.model.gamma(), self.model.sigma());
        let response = spectrum.eigenvalues().map(|lam| frequency_response_at(lam, cbar, gamma, sigma, self.alpha_reg));
        Ok(spectrum.apply_spectral(&response, x_t))
    }

    /// Dense evaluation of `(HᵀΣ^{−1}H + αL)^{−1}HᵀΣ^{−1} x_t`, with `H_t`
    /// from a scaling-and-squaring Taylor matrix exponential and `Σ_t` from
    /// `σ²(I − H²)L_γ^{−1}`. Independent of the eigendecomposition; used to
    /// cross-check [`denoise`](Self::denoise).
    pub fn denoise_dense(&self, x_t: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        let spectrum = self.model.spectrum();
        spectrum.check_signal(x_t)?;
        let cbar = self.positive_cbar(t)?;
        let n = spectrum.num_nodes();
        let l = spectrum.laplacian();
        let identity = DMatrix::<f64>::identity(n, n);
        let l_gamma = l + &identity * self.model.gamma();

        let h = expm(&(&l_gamma * -cbar));
        let l_gamma_inv = l_gamma.clone().cholesky().ok_or(GadError::SingularCovariance)?.inverse();
        let s2 = self.model.sigma() * self.model.sigma();
        let sigma_t = (&identity - &h * &h) * l_gamma_inv * s2;
        let sigma_t = (&sigma_t + sigma_t.transpose()) * 0.5;
        let sigma_inv = sigma_t.cholesky().ok_or(GadError::SingularCovariance)?.inverse();

        let ht_sinv = h.transpose() * sigma_inv;
        let system = &ht_sinv * &h + l * self.alpha_reg;
        let rhs = ht_sinv * x_t;
        system.lu().solve(&rhs).ok_or(GadError::SingularCovariance)
    }
}

/// `e^A` by scaling and squaring with a degree-18 Taylor polynomial.
fn expm(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = a.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    let mut term = DMatrix::<f64>::identity(n, n);
    let mut sum = term.clone();
    for k in 1..=18 {
        term = &term * &scaled / k as f64;
        sum += &term;
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{Graph, Spectrum};
    use crate::schedule::DriftSchedule;
    use approx::assert_relative_eq;
    use std::sync::Arc;

    fn denoiser(alpha: f64) -> ClosedFormDenoiser {
        let a = DMatrix::from_row_slice(4, 4, &[0., 1., 1., 0., 1., 0., 1., 0., 1., 1., 0., 1., 0., 0., 1., 0.]);
        let s = Arc::new(Spectrum::from_graph(&Graph::new(a).unwrap()).unwrap());
        let schedule = DriftSchedule::fcps(0.05, 1.5, 3.0, 1.0).unwrap();
        ClosedFormDenoiser::new(ForwardModel::new(s, schedule, 0.8, 0.1).unwrap(), alpha).unwrap()
    }

    #[test]
    fn response_matches_formula() {
        for &(lam, cbar, alpha) in &[(0.0, 0.5, 1.0), (1.3, 2.0, 0.3), (2.0, 0.1, 10.0), (0.7, 4.0, 0.0)] {
            let (g, s): (f64, f64) = (0.1, 0.8);
            let a: f64 = (lam + g) * cbar;
            let want = a.exp() / (1.0 + alpha * s * s * lam / (lam + g) * ((2.0 * a).exp() - 1.0));
            assert_relative_eq!(frequency_response_at(lam, cbar, g, s, alpha), want, max_relative = 1e-13);
        }
    }

    #[test]
    fn limits() {
        let d = denoiser(1.0);
        // no elapsed noise: identity
        assert_relative_eq!(frequency_response_at(1.2, 0.0, 0.1, 1.0, 3.0), 1.0);
        // α = 0 is pure deconvolution
        let cbar = 0.7;
        assert_relative_eq!(frequency_response_at(1.5, cbar, 0.1, 1.0, 0.0), (1.6f64 * cbar).exp(), max_relative = 1e-14);
        // the λ = 0 mode ignores the regularizer
        for alpha in [0.0, 0.5, 100.0] {
            assert_relative_eq!(frequency_response_at(0.0, cbar, 0.1, 1.0, alpha), (0.1f64 * cbar).exp(), max_relative = 1e-14);
        }
        assert!(d.frequency_response(-0.1, 0.5).is_err());
    }

    #[test]
    fn t_zero_is_singular() {
        let d = denoiser(1.0);
        let x = DVector::from_element(4, 1.0);
        assert!(matches!(d.denoise(&x, 0.0), Err(GadError::SingularCovariance)));
        assert!(matches!(d.denoise_dense(&x, 0.0), Err(GadError::SingularCovariance)));
    }

    #[test]
    fn small_cbar_is_near_identity() {
        let d = denoiser(2.0);
        let x = DVector::from_vec(vec![0.2, -1.0, 0.5, 3.0]);
        let out = d.denoise(&x, 1e-6).unwrap();
        assert!((out - &x).amax() < 1e-6);
    }

    #[test]
    fn dense_and_spectral_agree() {
        let x = DVector::from_vec(vec![0.2, -1.0, 0.5, 3.0]);
        for alpha in [0.0, 0.1, 1.0, 10.0] {
            let d = denoiser(alpha);
            for t in [0.05, 0.5, 1.0] {
                let a = d.denoise(&x, t).unwrap();
                let b = d.denoise_dense(&x, t).unwrap();
                assert!((a - b).amax() < 1e-9, "alpha={alpha} t={t}");
            }
        }
    }

    #[test]
    fn expm_of_diagonal() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![-3.0, 0.5, 2.0]));
        let e = expm(&a);
        for (i, v) in [-3.0f64, 0.5, 2.0].iter().enumerate() {
            assert_relative_eq!(e[(i, i)], v.exp(), max_relative = 1e-13);
        }
    }
}
