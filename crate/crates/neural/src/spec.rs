use serde::{Deserialize, Serialize};

use crate::NeuralError;

const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
const SELU_SCALE: f64 = 1.050_700_987_355_480_5;

/// Element-wise activation used by dense layers and by the candidate/cell
/// path of recurrent layers. Recurrent gates always use the logistic sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Selu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Selu => {
                if x > 0.0 {
                    SELU_SCALE * x
                } else {
                    SELU_SCALE * SELU_ALPHA * (x.exp() - 1.0)
                }
            }
            Activation::Linear => x,
        }
    }

    /// Derivative given the pre-activation `x` and the activated value `y`.
    #[inline]
    pub fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Selu => {
                if x > 0.0 {
                    SELU_SCALE
                } else {
                    y + SELU_SCALE * SELU_ALPHA
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Dense,
    Gru,
    Lstm,
    /// Lookup table; the layer input is one integer index per time step.
    Embedding { vocab_size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub kind: LayerKind,
    /// Output width. For embeddings this is the vector dimension.
    pub units: usize,
    pub activation: Activation,
    #[serde(default)]
    pub dropout: f64,
}

impl LayerSpec {
    pub fn dense(units: usize, activation: Activation) -> Self {
        Self { kind: LayerKind::Dense, units, activation, dropout: 0.0 }
    }

    pub fn gru(units: usize, activation: Activation) -> Self {
        Self { kind: LayerKind::Gru, units, activation, dropout: 0.0 }
    }

    pub fn lstm(units: usize, activation: Activation) -> Self {
        Self { kind: LayerKind::Lstm, units, activation, dropout: 0.0 }
    }

    pub fn embedding(vocab_size: usize, dim: usize) -> Self {
        Self {
            kind: LayerKind::Embedding { vocab_size },
            units: dim,
            activation: Activation::Linear,
            dropout: 0.0,
        }
    }

    pub fn with_dropout(mut self, rate: f64) -> Self {
        self.dropout = rate;
        self
    }

    pub fn is_recurrent(&self) -> bool {
        matches!(self.kind, LayerKind::Gru | LayerKind::Lstm)
    }

    pub(crate) fn param_count(&self, input_dim: usize) -> usize {
        let u = self.units;
        match self.kind {
            LayerKind::Dense => u * input_dim + u,
            LayerKind::Gru => 3 * (u * input_dim + u * u + u),
            LayerKind::Lstm => 4 * (u * input_dim + u * u + u),
            LayerKind::Embedding { vocab_size } => vocab_size * u,
        }
    }
}

/// A stack of layers. Layers run in order: an optional leading embedding,
/// then any recurrent layers (sequence to sequence), then dense layers which
/// see only the final time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub layers: Vec<LayerSpec>,
}

impl NetworkSpec {
    pub fn new(input_dim: usize, layers: Vec<LayerSpec>) -> Result<Self, NeuralError> {
        let output_dim = layers.last().map(|l| l.units).unwrap_or(input_dim);
        let spec = Self { input_dim, output_dim, layers };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.layers.is_empty() {
            return Err(NeuralError::Spec("network has no layers".into()));
        }
        if self.input_dim == 0 {
            return Err(NeuralError::Spec("input_dim must be at least 1".into()));
        }
        let mut seen_dense = false;
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.units == 0 {
                return Err(NeuralError::Spec(format!("layer {i} has zero units")));
            }
            if !(0.0..1.0).contains(&layer.dropout) {
                return Err(NeuralError::Spec(format!(
                    "layer {i} dropout {} outside [0, 1)",
                    layer.dropout
                )));
            }
            match layer.kind {
                LayerKind::Embedding { vocab_size } => {
                    if i != 0 {
                        return Err(NeuralError::Spec(format!(
                            "embedding layer must be first, found at position {i}"
                        )));
                    }
                    if self.input_dim != 1 {
                        return Err(NeuralError::Spec(
                            "an embedding layer expects input_dim 1 (one index per step)".into(),
                        ));
                    }
                    if vocab_size == 0 {
                        return Err(NeuralError::Spec("embedding vocabulary is empty".into()));
                    }
                }
                LayerKind::Gru | LayerKind::Lstm => {
                    if seen_dense {
                        return Err(NeuralError::Spec(format!(
                            "recurrent layer {i} follows a dense layer"
                        )));
                    }
                }
                LayerKind::Dense => seen_dense = true,
            }
        }
        let last = self.layers.last().map(|l| l.units).unwrap_or(0);
        if last != self.output_dim {
            return Err(NeuralError::Spec(format!(
                "output_dim {} does not match last layer width {last}",
                self.output_dim
            )));
        }
        Ok(())
    }

    /// (input width, output width) of each layer.
    pub fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.layers.len());
        let mut width = self.input_dim;
        for layer in &self.layers {
            dims.push((width, layer.units));
            width = layer.units;
        }
        dims
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .zip(self.layer_dims())
            .map(|(l, (input, _))| l.param_count(input))
            .sum()
    }
}
