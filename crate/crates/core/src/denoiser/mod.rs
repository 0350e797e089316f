//! Estimators of the posterior mean `E[x_0 | x_t]`.

pub mod checkpoint;
pub mod closed_form;
pub mod gcnn;
pub mod train;

pub use checkpoint::Checkpoint;
pub use closed_form::{frequency_response_at, ClosedFormDenoiser};
pub use gcnn::{mmse_loss, Architecture, Coefficients, GcnnCache, GcnnDenoiser};
pub use train::{train, LossTrace, TrainConfig};
