use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::network::{EpochLoss, TrainedModel};
use crate::optim::{Nadam, NadamParams};
use crate::NeuralError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    #[default]
    Mae,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub loss: Loss,
    /// Epochs without validation improvement before stopping; 0 disables.
    pub patience: usize,
    pub seed: u64,
    pub learning_rate: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self { epochs: 100, batch_size: 32, loss: Loss::Mae, patience: 10, seed: 0, learning_rate: 0.002 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), NeuralError> {
        if self.epochs == 0 {
            return Err(NeuralError::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(NeuralError::Config("batch_size must be at least 1".into()));
        }
        if self.patience > self.epochs {
            return Err(NeuralError::Config(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            )));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(NeuralError::Config("learning_rate must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub window: Vec<Vec<f64>>,
    pub target: Vec<f64>,
}

impl Sample {
    pub fn new(window: Vec<Vec<f64>>, target: Vec<f64>) -> Self {
        Self { window, target }
    }
}

fn abs_error(pred: &[f64], target: &[f64]) -> f64 {
    pred.iter().zip(target).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64
}

/// d|p - t|/dp with the subgradient at zero residual fixed to 0.
fn mae_grad(pred: &[f64], target: &[f64], scale: f64) -> Vec<f64> {
    pred.iter()
        .zip(target)
        .map(|(p, t)| {
            let r = p - t;
            if r > 0.0 {
                scale
            } else if r < 0.0 {
                -scale
            } else {
                0.0
            }
        })
        .collect()
}

fn check_samples(model: &TrainedModel, samples: &[Sample]) -> Result<(), NeuralError> {
    for (i, s) in samples.iter().enumerate() {
        model.check_window(&s.window).map_err(|e| NeuralError::Dimension(format!("sample {i}: {e}")))?;
        if s.target.len() != model.spec().output_dim {
            return Err(NeuralError::Dimension(format!(
                "sample {i}: target width {} but network outputs {}",
                s.target.len(),
                model.spec().output_dim
            )));
        }
    }
    Ok(())
}

/// Mean absolute error over all samples and outputs, dropout disabled.
pub fn mean_absolute_error(model: &TrainedModel, samples: &[Sample]) -> Result<f64, NeuralError> {
    if samples.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    let mut total = 0.0;
    for s in samples {
        total += abs_error(&model.forward(&s.window)?, &s.target);
    }
    Ok(total / samples.len() as f64)
}

/// Mini-batch BPTT on mean absolute error with Nadam updates and early
/// stopping. Returns the weights of the best monitored epoch: validation
/// error, or end-of-epoch training error when `validation` is empty.
pub fn train(
    mut model: TrainedModel,
    data: &[Sample],
    validation: &[Sample],
    config: &TrainConfig,
) -> Result<TrainedModel, NeuralError> {
    config.validate()?;
    if data.is_empty() {
        return Err(NeuralError::EmptyDataset);
    }
    check_samples(&model, data)?;
    check_samples(&model, validation)?;

    let n_params = model.weights().len();
    let mut opt = Nadam::new(
        NadamParams { learning_rate: config.learning_rate, ..Default::default() },
        n_params,
    );
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; n_params];
    let out_dim = model.spec().output_dim as f64;

    let mut best_loss = f64::INFINITY;
    let mut best_weights = model.weights().to_vec();
    let mut stale = 0usize;
    let mut history = Vec::new();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch_idx, batch) in order.chunks(config.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 1.0 / (batch.len() as f64 * out_dim);
            let mut batch_loss = 0.0;
            for &i in batch {
                let s = &data[i];
                let (pred, caches) = model.forward_impl(&s.window, Some(&mut rng), true);
                batch_loss += abs_error(&pred, &s.target);
                model.backward(&caches, mae_grad(&pred, &s.target, scale), &mut grad);
            }
            if !batch_loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(NeuralError::Diverged { epoch, batch: batch_idx });
            }
            epoch_loss += batch_loss;
            opt.step(model.weights_mut(), &grad);
        }
        let train_loss = epoch_loss / data.len() as f64;
        let val_loss = if validation.is_empty() {
            None
        } else {
            Some(mean_absolute_error(&model, validation)?)
        };
        history.push(EpochLoss { epoch, train: train_loss, validation: val_loss });
        // without a validation set, monitor the end-of-epoch training error
        // in inference mode rather than the running average
        let monitored = match val_loss {
            Some(v) => v,
            None => mean_absolute_error(&model, data)?,
        };
        if !monitored.is_finite() {
            return Err(NeuralError::Diverged { epoch, batch: 0 });
        }
        if monitored < best_loss {
            best_loss = monitored;
            best_weights.copy_from_slice(model.weights());
            stale = 0;
        } else {
            stale += 1;
            if config.patience > 0 && stale >= config.patience {
                break;
            }
        }
    }
    model.weights_mut().copy_from_slice(&best_weights);
    model.history = history;
    Ok(model)
}

/// Largest relative difference between the backprop gradient of the sample's
/// MAE loss and central finite differences, over every parameter.
/// Relative error is `|a - n| / max(|a|, |n|, 1e-12)`.
pub fn gradient_check(model: &TrainedModel, sample: &Sample, epsilon: f64) -> Result<f64, NeuralError> {
    if !(1e-7..=1e-3).contains(&epsilon) {
        return Err(NeuralError::Config(format!("epsilon {epsilon} outside [1e-7, 1e-3]")));
    }
    check_samples(model, std::slice::from_ref(sample))?;
    let out_dim = model.spec().output_dim as f64;
    let (pred, caches) = model.forward_impl::<ChaCha8Rng>(&sample.window, None, true);
    let mut analytic = vec![0.0; model.weights().len()];
    model.backward(&caches, mae_grad(&pred, &sample.target, 1.0 / out_dim), &mut analytic);

    let mut probe = model.clone();
    let loss = |m: &TrainedModel| -> f64 {
        let (p, _) = m.forward_impl::<ChaCha8Rng>(&sample.window, None, false);
        abs_error(&p, &sample.target)
    };
    let mut worst = 0.0_f64;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = probe.weights()[i];
        probe.weights_mut()[i] = orig + epsilon;
        let plus = loss(&probe);
        probe.weights_mut()[i] = orig - epsilon;
        let minus = loss(&probe);
        probe.weights_mut()[i] = orig;
        let numeric = (plus - minus) / (2.0 * epsilon);
        let denom = a.abs().max(numeric.abs()).max(1e-12);
        worst = worst.max((a - numeric).abs() / denom);
    }
    Ok(worst)
}
