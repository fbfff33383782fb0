use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::adam::{adam_step, AdamState};
use super::loss::mse_sample;
use super::{Model, ShapeError};
use crate::Scalar;

/// Halve-on-plateau learning-rate schedule, counted in evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlateauDecay {
    pub factor: f64,
    pub patience: usize,
    pub floor: f64,
}

impl Default for PlateauDecay {
    fn default() -> Self {
        PlateauDecay {
            factor: 0.5,
            patience: 5,
            floor: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    /// Batches between evaluations; `None` evaluates after every epoch.
    pub eval_interval: Option<usize>,
    pub learning_rate: f64,
    pub decay: PlateauDecay,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 83,
            batch_size: 64,
            eval_interval: None,
            learning_rate: 1e-4,
            decay: PlateauDecay::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainLogEntry {
    pub epoch: usize,
    /// Optimizer steps taken so far.
    pub step: usize,
    /// Mean batch loss since the previous evaluation.
    pub train_loss: f64,
    pub eval_accuracy: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    /// Weights at the evaluation with the highest accuracy.
    pub best: Model<T>,
    pub best_accuracy: f64,
    pub log: Vec<TrainLogEntry>,
    /// Mean batch loss of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Optimizer state at the end of training.
    pub optimizer: AdamState<T>,
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("non-finite loss at step {step}")]
    Diverged { step: usize, log: Vec<TrainLogEntry> },
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("the {0} set is empty")]
    Empty(&'static str),
    #[error(transparent)]
    Shape(#[from] ShapeError),
}

/// Predicted classes and probability vectors for a set of inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<T> {
    pub predictions: Vec<usize>,
    pub probabilities: Vec<Vec<T>>,
}

impl<T> Evaluation<T> {
    pub fn accuracy(&self, targets: &[usize]) -> f64 {
        if targets.is_empty() {
            return 0.0;
        }
        let hits = self
            .predictions
            .iter()
            .zip(targets)
            .filter(|(p, t)| p == t)
            .count();
        hits as f64 / targets.len() as f64
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax<T: Scalar>(v: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

pub fn evaluate<T: Scalar>(model: &Model<T>, inputs: &[&[T]]) -> Result<Evaluation<T>, ShapeError> {
    let probabilities = inputs
        .par_iter()
        .map(|x| model.predict(x))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Evaluation {
        predictions: probabilities.iter().map(|p| argmax(p)).collect(),
        probabilities,
    })
}

fn accuracy_on<T: Scalar>(model: &Model<T>, set: &[(&[T], usize)]) -> Result<f64, ShapeError> {
    let inputs: Vec<&[T]> = set.iter().map(|s| s.0).collect();
    let targets: Vec<usize> = set.iter().map(|s| s.1).collect();
    Ok(evaluate(model, &inputs)?.accuracy(&targets))
}

/// Mean loss over `batch` and its parameter gradients.
///
/// Samples run in parallel; their gradients are summed in `f64` in sample
/// order, so the result does not depend on the thread count.
fn batch_gradients<T: Scalar>(
    model: &Model<T>,
    batch: &[(&[T], usize)],
) -> Result<(f64, Vec<Vec<T>>), ShapeError> {
    let denom = (batch.len() * model.n_classes()) as f64;
    let per_sample = batch
        .par_iter()
        .map(|&(x, y)| {
            let cache = model.forward(x)?;
            let (sq, grad_probs) = mse_sample(&cache.probs, y, denom)?;
            Ok((sq, model.backward(&cache, &grad_probs)?))
        })
        .collect::<Result<Vec<_>, ShapeError>>()?;

    let mut total = 0.0;
    let mut acc: Vec<Vec<f64>> = model.params().iter().map(|p| vec![0.0; p.len()]).collect();
    for (sq, grads) in per_sample {
        total += sq;
        for (a, g) in acc.iter_mut().zip(grads) {
            for (a, g) in a.iter_mut().zip(g) {
                *a += g.wide();
            }
        }
    }
    let grads = acc
        .into_iter()
        .map(|a| a.into_iter().map(T::of).collect())
        .collect();
    Ok((total / denom, grads))
}

/// Mini-batch Adam on `train_set`, evaluating on `eval_set` and keeping the
/// weights with the best evaluation accuracy.
pub fn train<T: Scalar>(
    model: Model<T>,
    train_set: &[(&[T], usize)],
    eval_set: &[(&[T], usize)],
    config: &TrainConfig,
) -> Result<TrainOutcome<T>, TrainError> {
    if config.batch_size == 0 {
        return Err(TrainError::Config("batch size must be at least 1".into()));
    }
    if config.eval_interval == Some(0) {
        return Err(TrainError::Config("evaluation interval must be at least 1".into()));
    }
    let mut optimizer = AdamState::new(&model.params(), config.learning_rate);
    if config.epochs == 0 {
        return Ok(TrainOutcome {
            best: model,
            best_accuracy: f64::NAN,
            log: Vec::new(),
            epoch_losses: Vec::new(),
            optimizer,
        });
    }
    if train_set.is_empty() {
        return Err(TrainError::Empty("training"));
    }
    if eval_set.is_empty() {
        return Err(TrainError::Empty("evaluation"));
    }

    let mut model = model;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut log = Vec::new();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut best = model.clone();
    let mut best_accuracy = f64::NEG_INFINITY;
    let mut stale_evals = 0usize;
    let mut step = 0usize;
    let (mut window_loss, mut window_batches) = (0.0, 0usize);

    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut epoch_loss, mut epoch_batches) = (0.0, 0usize);
        let n_batches = order.len().div_ceil(config.batch_size);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch: Vec<(&[T], usize)> = chunk.iter().map(|&i| train_set[i]).collect();
            let (loss, grads) = batch_gradients(&model, &batch)?;
            step += 1;
            if !loss.is_finite() {
                return Err(TrainError::Diverged { step, log });
            }
            adam_step(&mut model.params_mut(), &grads, &mut optimizer);
            epoch_loss += loss;
            epoch_batches += 1;
            window_loss += loss;
            window_batches += 1;

            let due = match config.eval_interval {
                Some(n) => step.is_multiple_of(n),
                None => b + 1 == n_batches,
            };
            if !due {
                continue;
            }
            let accuracy = accuracy_on(&model, eval_set)?;
            log.push(TrainLogEntry {
                epoch,
                step,
                train_loss: window_loss / window_batches as f64,
                eval_accuracy: accuracy,
                learning_rate: optimizer.learning_rate,
            });
            window_loss = 0.0;
            window_batches = 0;
            if accuracy > best_accuracy {
                best_accuracy = accuracy;
                best = model.clone();
                stale_evals = 0;
            } else {
                stale_evals += 1;
                if stale_evals >= config.decay.patience {
                    optimizer.learning_rate =
                        (optimizer.learning_rate * config.decay.factor).max(config.decay.floor);
                    stale_evals = 0;
                }
            }
        }
        epoch_losses.push(epoch_loss / epoch_batches as f64);
    }

    if log.is_empty() {
        // Interval longer than the whole run: score the final weights once.
        best_accuracy = accuracy_on(&model, eval_set)?;
        best = model;
    }
    Ok(TrainOutcome {
        best,
        best_accuracy,
        log,
        epoch_losses,
        optimizer,
    })
}
