//! Graph convolutional denoiser `g_Θ(x_t, L, t)`.
//!
//! Each layer maps `X ∈ R^{N×F_in}` to `σ(Σ_k L^k X Θ_k)` with
//! `Θ_k ∈ R^{F_in×F_out}`; hidden layers use ReLU and the last layer is linear.
//! The input has two channels, the noisy signal and the constant `t/T`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};
use crate::graph::Spectrum;

pub const INPUT_WIDTH: usize = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub layers: usize,
    #[serde(rename = "K")]
    pub order: usize,
    pub hidden_width: usize,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture { layers: 3, order: 3, hidden_width: 16 }
    }
}

impl Architecture {
    /// `[2, hidden, ..., hidden, 1]`.
    pub fn widths(&self) -> Vec<usize> {
        let mut w = vec![INPUT_WIDTH];
        w.extend(std::iter::repeat_n(self.hidden_width, self.layers.saturating_sub(1)));
        w.push(1);
        w
    }
}

/// Filter taps indexed `[layer][hop]`, each `width_l × width_{l+1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients(pub Vec<Vec<DMatrix<f64>>>);

impl Coefficients {
    pub fn zeros(widths: &[usize], order: usize) -> Self {
        Coefficients(
            widths
                .windows(2)
                .map(|w| (0..=order).map(|_| DMatrix::zeros(w[0], w[1])).collect())
                .collect(),
        )
    }

    pub fn zeros_like(&self) -> Self {
        Coefficients(self.0.iter().map(|l| l.iter().map(|m| DMatrix::zeros(m.nrows(), m.ncols())).collect()).collect())
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.0.iter().flatten().flat_map(|m| m.iter())
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.0.iter_mut().flatten().flat_map(|m| m.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.0.iter().flatten().map(|m| m.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `self += scale * other`.
    pub fn axpy(&mut self, scale: f64, other: &Coefficients) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a += scale * b;
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for a in self.iter_mut() {
            *a *= factor;
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct GcnnCache {
    /// `[layer][k]`: `L^k X_l`.
    powers: Vec<Vec<DMatrix<f64>>>,
    /// Pre-activation of each layer.
    pre: Vec<DMatrix<f64>>,
}

#[derive(Debug, Clone)]
pub struct GcnnDenoiser {
    spectrum: Arc<Spectrum>,
    order: usize,
    widths: Vec<usize>,
    coeffs: Coefficients,
    horizon: f64,
}

impl GcnnDenoiser {
    /// Random initialization, taps i.i.d. uniform in `±(width_l (K+1))^{−1/2}`.
    pub fn init(spectrum: Arc<Spectrum>, arch: Architecture, horizon: f64, seed: u64) -> Result<Self> {
        if arch.layers == 0 || arch.order == 0 || (arch.layers > 1 && arch.hidden_width == 0) {
            return Err(GadError::param(format!("invalid architecture {arch:?}")));
        }
        let widths = arch.widths();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut coeffs = Coefficients::zeros(&widths, arch.order);
        for (layer, taps) in coeffs.0.iter_mut().enumerate() {
            let a = ((widths[layer] * (arch.order + 1)) as f64).powf(-0.5);
            for m in taps.iter_mut() {
                for v in m.iter_mut() {
                    *v = rng.random_range(-a..=a);
                }
            }
        }
        Self::from_coefficients(spectrum, arch.order, widths, coeffs, horizon)
    }

    pub fn from_coefficients(
        spectrum: Arc<Spectrum>,
        order: usize,
        widths: Vec<usize>,
        coeffs: Coefficients,
        horizon: f64,
    ) -> Result<Self> {
        if widths.len() < 2 || widths[0] != INPUT_WIDTH || *widths.last().unwrap() != 1 {
            return Err(GadError::param(format!("widths must run from {INPUT_WIDTH} to 1, got {widths:?}")));
        }
        if !(horizon > 0.0) {
            return Err(GadError::param("horizon must be positive"));
        }
        if coeffs.0.len() != widths.len() - 1 {
            return Err(GadError::param("one tap set per layer required"));
        }
        for (layer, taps) in coeffs.0.iter().enumerate() {
            if taps.len() != order + 1 {
                return Err(GadError::param(format!("layer {layer} needs {} taps", order + 1)));
            }
            for m in taps {
                if m.shape() != (widths[layer], widths[layer + 1]) {
                    return Err(GadError::param(format!("layer {layer} tap shape {:?}", m.shape())));
                }
            }
        }
        if coeffs.iter().any(|v| !v.is_finite()) {
            return Err(GadError::param("non-finite coefficient"));
        }
        Ok(GcnnDenoiser { spectrum, order, widths, coeffs, horizon })
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coeffs
    }

    pub fn coefficients_mut(&mut self) -> &mut Coefficients {
        &mut self.coeffs
    }

    /// Same network on another graph (e.g. a node permutation of this one).
    pub fn with_spectrum(&self, spectrum: Arc<Spectrum>) -> Result<Self> {
        if spectrum.num_nodes() != self.spectrum.num_nodes() {
            return Err(GadError::DimensionMismatch { expected: self.spectrum.num_nodes(), got: spectrum.num_nodes() });
        }
        Ok(GcnnDenoiser { spectrum, ..self.clone() })
    }

    fn input_features(&self, x_t: &DVector<f64>, t: f64) -> DMatrix<f64> {
        let n = x_t.len();
        let tau = t / self.horizon;
        DMatrix::from_fn(n, INPUT_WIDTH, |i, c| if c == 0 { x_t[i] } else { tau })
    }

    /// Estimate of `x_0` together with the activations needed by
    /// [`backward`](Self::backward).
    pub fn forward(&self, x_t: &DVector<f64>, t: f64) -> Result<(DVector<f64>, GcnnCache)> {
        self.spectrum.check_signal(x_t)?;
        let l = self.spectrum.laplacian();
        let last = self.num_layers() - 1;
        let mut x = self.input_features(x_t, t);
        let mut powers = Vec::with_capacity(self.num_layers());
        let mut pre = Vec::with_capacity(self.num_layers());
        for (layer, taps) in self.coeffs.0.iter().enumerate() {
            let mut p = Vec::with_capacity(self.order + 1);
            p.push(x);
            for k in 1..=self.order {
                let next = l * &p[k - 1];
                p.push(next);
            }
            let mut z = &p[0] * &taps[0];
            for k in 1..=self.order {
                z += &p[k] * &taps[k];
            }
            x = if layer == last { z.clone() } else { z.map(|v| v.max(0.0)) };
            powers.push(p);
            pre.push(z);
        }
        Ok((x.column(0).into_owned(), GcnnCache { powers, pre }))
    }

    pub fn predict(&self, x_t: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
        self.forward(x_t, t).map(|(out, _)| out)
    }

    /// Gradient w.r.t. every tap given `∂loss/∂x̂_0`.
    pub fn backward(&self, cache: &GcnnCache, d_out: &DVector<f64>) -> Coefficients {
        let l = self.spectrum.laplacian();
        let mut grads = self.coeffs.zeros_like();
        let mut upstream = DMatrix::from_column_slice(d_out.len(), 1, d_out.as_slice());
        for layer in (0..self.num_layers()).rev() {
            let dz = if layer == self.num_layers() - 1 {
                upstream
            } else {
                // ReLU subgradient at 0 is 0
                upstream.zip_map(&cache.pre[layer], |g, z| if z > 0.0 { g } else { 0.0 })
            };
            let taps = &self.coeffs.0[layer];
            for k in 0..=self.order {
                grads.0[layer][k] = cache.powers[layer][k].tr_mul(&dz);
            }
            if layer == 0 {
                break;
            }
            // Σ_k L^k dz Θ_kᵀ by Horner's rule (L is symmetric)
            let mut acc = &dz * taps[self.order].transpose();
            for k in (0..self.order).rev() {
                acc = l * acc + &dz * taps[k].transpose();
            }
            upstream = acc;
        }
        grads
    }

    /// `(½‖x_0 − x̂_0‖², ∇_Θ)`.
    pub fn gradient(&self, x_t: &DVector<f64>, t: f64, x0: &DVector<f64>) -> Result<(f64, Coefficients)> {
        self.spectrum.check_signal(x0)?;
        let (estimate, cache) = self.forward(x_t, t)?;
        let residual = estimate - x0;
        let loss = 0.5 * residual.norm_squared();
        Ok((loss, self.backward(&cache, &residual)))
    }
}

/// Mean over the batch of squared Euclidean errors. Columns are signals.
pub fn mmse_loss(x0: &DMatrix<f64>, estimates: &DMatrix<f64>) -> Result<f64> {
    if x0.shape() != estimates.shape() {
        return Err(GadError::DimensionMismatch { expected: x0.len(), got: estimates.len() });
    }
    if x0.ncols() == 0 {
        return Err(GadError::param("empty batch"));
    }
    Ok((x0 - estimates).norm_squared() / x0.ncols() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;

    fn path3() -> Arc<Spectrum> {
        let g = Graph::new(DMatrix::from_row_slice(3, 3, &[0., 1., 0., 1., 0., 1., 0., 1., 0.])).unwrap();
        Arc::new(Spectrum::from_graph(&g).unwrap())
    }

    #[test]
    fn zero_coefficients_give_zero() {
        let s = path3();
        let widths = Architecture::default().widths();
        let net = GcnnDenoiser::from_coefficients(s, 3, widths.clone(), Coefficients::zeros(&widths, 3), 1.0).unwrap();
        let out = net.predict(&DVector::from_vec(vec![1.0, -2.0, 0.5]), 0.3).unwrap();
        assert_eq!(out, DVector::zeros(3));
    }

    #[test]
    fn identity_network() {
        let s = path3();
        let mut coeffs = Coefficients::zeros(&[2, 1], 2);
        coeffs.0[0][0][(0, 0)] = 1.0;
        let net = GcnnDenoiser::from_coefficients(s, 2, vec![2, 1], coeffs, 1.0).unwrap();
        let x = DVector::from_vec(vec![1.0, -2.0, 0.5]);
        assert_eq!(net.predict(&x, 0.7).unwrap(), x);
    }

    #[test]
    fn zero_residual_zero_gradient() {
        let s = path3();
        let net = GcnnDenoiser::init(s, Architecture { layers: 2, order: 2, hidden_width: 4 }, 1.0, 3).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.1, -0.7]);
        let target = net.predict(&x, 0.5).unwrap();
        let (loss, grads) = net.gradient(&x, 0.5, &target).unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(grads.max_abs(), 0.0);
    }

    #[test]
    fn gradient_is_linear_in_upstream() {
        let s = path3();
        let net = GcnnDenoiser::init(s, Architecture { layers: 2, order: 2, hidden_width: 4 }, 1.0, 5).unwrap();
        let x = DVector::from_vec(vec![0.3, 0.1, -0.7]);
        let (_, cache) = net.forward(&x, 0.2).unwrap();
        let d = DVector::from_vec(vec![1.0, -0.5, 2.0]);
        let g1 = net.backward(&cache, &d);
        let g2 = net.backward(&cache, &(&d * 2.0));
        for (a, b) in g1.iter().zip(g2.iter()) {
            assert!((2.0 * a - b).abs() <= 1e-14 * b.abs().max(1.0));
        }
    }

    #[test]
    fn rejects_bad_shapes() {
        let s = path3();
        assert!(GcnnDenoiser::from_coefficients(s.clone(), 1, vec![1, 1], Coefficients::zeros(&[1, 1], 1), 1.0).is_err());
        assert!(GcnnDenoiser::from_coefficients(s, 2, vec![2, 1], Coefficients::zeros(&[2, 1], 1), 1.0).is_err());
    }

    #[test]
    fn mmse_examples() {
        let a = DMatrix::from_element(4, 1, 1.0);
        assert_eq!(mmse_loss(&a, &a).unwrap(), 0.0);
        assert_eq!(mmse_loss(&a, &DMatrix::zeros(4, 1)).unwrap(), 4.0);
        let x0 = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 2.0, 0.0]);
        // per-signal losses 2 and 4
        assert_eq!(mmse_loss(&x0, &DMatrix::zeros(2, 2)).unwrap(), 3.0);
        assert!(mmse_loss(&x0, &DMatrix::zeros(2, 1)).is_err());
    }
}
