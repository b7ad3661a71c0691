//! Recurrent network building blocks for the simulation pipeline: dense,
//! GRU, LSTM and embedding layers over a flat parameter vector, hand-written
//! backpropagation through time, a Nadam optimizer, and a finite-difference
//! gradient checker.
//!
//! ```
//! use prosim_neural::{Activation, LayerSpec, NetworkSpec, TrainedModel};
//!
//! let spec = NetworkSpec::new(3, vec![
//!     LayerSpec::gru(4, Activation::Tanh),
//!     LayerSpec::dense(1, Activation::Linear),
//! ]).unwrap();
//! let model = TrainedModel::init(spec, 42).unwrap();
//! let out = model.forward(&[vec![0.0, 0.5, 1.0], vec![1.0, 0.0, 0.0]]).unwrap();
//! assert_eq!(out.len(), 1);
//! ```

mod io;
mod network;
mod optim;
mod spec;
mod train;

pub use io::{FORMAT_VERSION, MAGIC};
pub use network::{EpochLoss, TrainedModel};
pub use optim::{Nadam, NadamParams};
pub use spec::{Activation, LayerKind, LayerSpec, NetworkSpec};
pub use train::{gradient_check, mean_absolute_error, train, Loss, Sample, TrainConfig};

#[derive(Debug, thiserror::Error)]
pub enum NeuralError {
    #[error("invalid network spec: {0}")]
    Spec(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("training diverged (non-finite loss) at epoch {epoch}, batch {batch}")]
    Diverged { epoch: usize, batch: usize },
    #[error("weight file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
