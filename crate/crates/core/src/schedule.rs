//! Drift coefficient schedules `c_t` and their integrals `c̄_t = ∫_0^t c_s ds`.

use serde::{Deserialize, Serialize};

use crate::error::{GadError, Result};

/// Drift schedule of the heat-equation forward process.
///
/// * `Uls`: uniform linear, `c_t = c·t`.
/// * `Fcps`: floor constrained polynomial, `c_t = c_min + k (t/T)^α` with
///   `k = (c_0 − c_min T)(α + 1)/T`, so that `c̄_T = c_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum DriftSchedule {
    Uls {
        c: f64,
        #[serde(rename = "T")]
        horizon: f64,
    },
    Fcps {
        c_min: f64,
        c_0: f64,
        alpha: f64,
        #[serde(rename = "T")]
        horizon: f64,
    },
}

impl Default for DriftSchedule {
    fn default() -> Self {
        DriftSchedule::Fcps { c_min: 0.05, c_0: 8.0, alpha: 4.0, horizon: 1.0 }
    }
}

impl DriftSchedule {
    pub fn uls(c: f64, horizon: f64) -> Result<Self> {
        let s = DriftSchedule::Uls { c, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn fcps(c_min: f64, c_0: f64, alpha: f64, horizon: f64) -> Result<Self> {
        let s = DriftSchedule::Fcps { c_min, c_0, alpha, horizon };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let horizon = self.horizon();
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(GadError::param(format!("horizon T must be positive, got {horizon}")));
        }
        match *self {
            DriftSchedule::Uls { c, .. } => {
                if !(c > 0.0 && c.is_finite()) {
                    return Err(GadError::param(format!("ULS slope must be positive, got {c}")));
                }
            }
            DriftSchedule::Fcps { c_min, c_0, alpha, horizon } => {
                if !(c_min > 0.0 && c_min < 1.0) {
                    return Err(GadError::param(format!("FCPS c_min must lie in (0,1), got {c_min}")));
                }
                if !(alpha > 1.0 && alpha.is_finite()) {
                    return Err(GadError::param(format!("FCPS alpha must exceed 1, got {alpha}")));
                }
                if !(c_0 > c_min * horizon && c_0.is_finite()) {
                    return Err(GadError::param(format!(
                        "FCPS needs c_0 > c_min*T ({c_0} <= {})",
                        c_min * horizon
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        match *self {
            DriftSchedule::Uls { horizon, .. } | DriftSchedule::Fcps { horizon, .. } => horizon,
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        let horizon = self.horizon();
        if !(0.0..=horizon).contains(&t) {
            return Err(GadError::TimeOutOfRange { t, horizon });
        }
        Ok(())
    }

    /// `c_t`.
    pub fn drift_at(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.drift_unchecked(t))
    }

    /// `c̄_t`, in closed form.
    pub fn integrated_drift(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(self.integrated_unchecked(t))
    }

    pub(crate) fn drift_unchecked(&self, t: f64) -> f64 {
        match *self {
            DriftSchedule::Uls { c, .. } => c * t,
            DriftSchedule::Fcps { c_min, c_0, alpha, horizon } => {
                let k = (c_0 - c_min * horizon) * (alpha + 1.0) / horizon;
                c_min + k * (t / horizon).powf(alpha)
            }
        }
    }

    pub(crate) fn integrated_unchecked(&self, t: f64) -> f64 {
        match *self {
            DriftSchedule::Uls { c, .. } => 0.5 * c * t * t,
            DriftSchedule::Fcps { c_min, c_0, alpha, horizon } => {
                c_min * t + (c_0 - c_min * horizon) * (t / horizon).powf(alpha + 1.0)
            }
        }
    }
}
