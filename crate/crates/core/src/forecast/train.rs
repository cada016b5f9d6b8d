//! Mini-batch training with early stopping on a held-out split.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{ForecastConfig, ForecastModel, Sample, Window};
use crate::data::DenseSeries;
use crate::error::{Error, Result};
use crate::rng::derived_rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Adam,
    Sgd,
}

/// What the decoder sees during training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// Every step is fed the true previous hours.
    TeacherForcing,
    /// Steps are fed the model's own predictions and the loss is
    /// backpropagated through the whole rollout.
    FreeRunning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub regime: Regime,
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Fraction of series held out for early stopping.
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            regime: Regime::TeacherForcing,
            optimizer: Optimizer::Adam,
            learning_rate: 1e-3,
            batch_size: 64,
            max_epochs: 40,
            patience: 6,
            validation_fraction: 0.2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
}

/// A trained model with its learning curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trained {
    pub model: ForecastModel,
    pub history: Vec<EpochLog>,
    pub best_epoch: usize,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Self { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for i in 0..params.len() {
            self.m[i] = Self::B1 * self.m[i] + (1.0 - Self::B1) * grad[i];
            self.v[i] = Self::B2 * self.v[i] + (1.0 - Self::B2) * grad[i] * grad[i];
            params[i] -= lr * (self.m[i] / c1) / ((self.v[i] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Splits series indices into training and validation parts.
fn split(n: usize, fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut derived_rng(seed, "validation-split", 0));
    let n_val = if n >= 5 { ((n as f64 * fraction).round() as usize).min(n - 1) } else { 0 };
    let val = idx.split_off(n - n_val);
    (idx, val)
}

/// Trains a forecaster on `data` under the configured regime.
///
/// Validation loss is the free-running masked MSE on the held-out series (or
/// the training loss when the dataset is too small to split). The parameters
/// of the best epoch are restored.
pub fn train(config: &ForecastConfig, data: &[DenseSeries], tc: &TrainConfig) -> Result<Trained> {
    if data.is_empty() {
        return Err(Error::data("empty training set"));
    }
    if tc.batch_size == 0 {
        return Err(Error::param("batch size must be positive"));
    }
    if !(0.0..1.0).contains(&tc.validation_fraction) {
        return Err(Error::param("validation fraction must lie in [0, 1)"));
    }
    if !tc.learning_rate.is_finite() || tc.learning_rate < 0.0 {
        return Err(Error::param("learning rate must be finite and non-negative"));
    }
    if config.lag == 0 {
        return Err(Error::param("lag must be positive"));
    }
    let n_features = data[0].n_features();
    let mut model = ForecastModel::init(config.clone(), n_features, tc.seed);
    let (train_idx, val_idx) = split(data.len(), tc.validation_fraction, tc.seed);
    let mut samples: Vec<Sample> = Vec::new();
    let mut windows: Vec<Window> = Vec::new();
    for &i in &train_idx {
        match tc.regime {
            Regime::TeacherForcing => samples.extend(model.samples(&data[i])?),
            Regime::FreeRunning => windows.extend(model.windows(&data[i])?),
        }
    }
    let n_units = samples.len() + windows.len();
    if n_units == 0 {
        return Err(Error::data(format!(
            "no training series covers {} context + {} forecast hours",
            config.context, config.horizon
        )));
    }
    let val: Vec<DenseSeries> = val_idx.iter().map(|&i| data[i].clone()).collect();
    let validation = |m: &ForecastModel, train_loss: f64| -> Result<f64> {
        if val.is_empty() {
            Ok(train_loss)
        } else {
            m.rollout_mse(&val)
        }
    };

    let mut rng = derived_rng(tc.seed, "train-order", 0);
    let mut adam = Adam::new(model.params().len());
    let mut grad = vec![0.0; model.params().len()];
    let mut order: Vec<usize> = (0..n_units).collect();
    let mut history = Vec::new();
    let mut best = (f64::INFINITY, 0usize, model.params().to_vec());
    let mut stale = 0;
    for epoch in 0..tc.max_epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(tc.batch_size).enumerate() {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let loss = match tc.regime {
                Regime::TeacherForcing => model.accumulate(chunk.iter().map(|&i| &samples[i]), &mut grad),
                Regime::FreeRunning => model.accumulate_rollout(chunk.iter().map(|&i| &windows[i]), &mut grad),
            };
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::numeric(format!(
                    "non-finite loss or gradient at epoch {epoch}, batch {b} (loss {loss})"
                )));
            }
            total += loss * chunk.len() as f64;
            let lr = tc.learning_rate;
            match tc.optimizer {
                Optimizer::Adam => adam.step(model.params_mut(), &grad, lr),
                Optimizer::Sgd => {
                    for (p, g) in model.params_mut().iter_mut().zip(&grad) {
                        *p -= lr * g;
                    }
                }
            }
        }
        let train_loss = total / n_units as f64;
        let val_loss = validation(&model, train_loss)?;
        if !val_loss.is_finite() {
            return Err(Error::numeric(format!("non-finite validation loss at epoch {epoch}")));
        }
        history.push(EpochLog { epoch, train_loss, validation_loss: val_loss });
        if val_loss < best.0 {
            best = (val_loss, epoch, model.params().to_vec());
            stale = 0;
        } else {
            stale += 1;
            if stale >= tc.patience {
                break;
            }
        }
    }
    model.params_mut().copy_from_slice(&best.2);
    model.mark_trained();
    Ok(Trained { model, history, best_epoch: best.1 })
}
