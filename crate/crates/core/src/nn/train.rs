use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamHyper, AdamState, CnnConfig, CnnModel, Mode, Scalar};
use crate::embeddings::SentenceMatrix;
use crate::error::{Error, Result};
use crate::rng::{self, stream};

/// Steps between loss-trace entries.
pub const LOSS_TRACE_EVERY: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    /// Number of completed steps.
    pub step: usize,
    /// Mean minibatch loss over the steps since the previous entry.
    pub loss: f64,
    pub valid_accuracy: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainedCnn<T> {
    pub model: CnnModel<T>,
    pub trace: Vec<LossPoint>,
}

/// Minibatch Adam training for `config.iterations` steps. Batches are drawn
/// uniformly with replacement; batch order, dropout masks and initialization
/// all derive from `config.seed`.
pub fn train_cnn<T: Scalar>(
    config: &CnnConfig,
    train: &[(SentenceMatrix<T>, usize)],
    valid: Option<&[(SentenceMatrix<T>, usize)]>,
) -> Result<TrainedCnn<T>> {
    config.validate()?;
    if train.is_empty() {
        return Err(Error::InvalidConfig("training set is empty".into()));
    }
    if let Some((_, bad)) = train.iter().find(|(_, y)| *y >= config.class_count) {
        return Err(Error::InvalidConfig(format!(
            "label {bad} outside {} classes",
            config.class_count
        )));
    }

    let mut model = CnnModel::<T>::new(config.clone())?;
    let mut adam = AdamState::new(&model.params, AdamHyper::default());
    let mut batch_rng = rng::seeded(rng::derive_seed(config.seed, stream::BATCH));
    let dropout_seed = rng::derive_seed(config.seed, stream::DROPOUT);

    let mut trace = Vec::new();
    let mut window_loss = 0.0;
    let mut window_steps = 0;
    let mut inputs = Vec::with_capacity(config.batch_size);
    let mut labels = Vec::with_capacity(config.batch_size);

    for step in 0..config.iterations {
        inputs.clear();
        labels.clear();
        for _ in 0..config.batch_size {
            let (m, y) = &train[batch_rng.random_range(0..train.len())];
            inputs.push(m);
            labels.push(*y);
        }
        let fwd = model.forward_batch(
            &inputs,
            Mode::Train,
            rng::derive_seed(dropout_seed, step as u64),
        )?;
        let loss = model.batch_loss(&fwd, &labels);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { step, loss });
        }
        let grads = model.backward(&fwd, &labels);
        drop(fwd);
        adam_step(&mut model, &grads, &mut adam, config.learning_rate);

        window_loss += loss;
        window_steps += 1;
        let done = step + 1;
        if done % LOSS_TRACE_EVERY == 0 || done == config.iterations {
            let valid_accuracy = match valid {
                Some(v) if !v.is_empty() => Some(accuracy(&model, v)?),
                _ => None,
            };
            trace.push(LossPoint {
                step: done,
                loss: window_loss / window_steps as f64,
                valid_accuracy,
            });
            window_loss = 0.0;
            window_steps = 0;
        }
    }
    Ok(TrainedCnn { model, trace })
}

/// Fraction of `data` classified correctly in inference mode.
pub fn accuracy<T: Scalar>(
    model: &CnnModel<T>,
    data: &[(SentenceMatrix<T>, usize)],
) -> Result<f64> {
    let inputs: Vec<_> = data.iter().map(|(m, _)| m).collect();
    let probs = model.predict_proba(&inputs)?;
    let correct = probs
        .rows()
        .into_iter()
        .zip(data)
        .filter(|(row, (_, y))| super::model::argmax_row(row.iter().copied()) == *y)
        .count();
    Ok(correct as f64 / data.len() as f64)
}

/// Loss trace as CSV `step,loss`.
pub fn write_loss_trace<W: Write>(mut out: W, trace: &[LossPoint]) -> Result<()> {
    writeln!(out, "step,loss")?;
    for p in trace {
        writeln!(out, "{},{}", p.step, p.loss)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config(iterations: usize) -> CnnConfig {
        CnnConfig {
            filter_count: 6,
            filter_width: 2,
            embedding_dim: 4,
            fc1_units: 16,
            fc2_units: 8,
            class_count: 2,
            iterations,
            batch_size: 8,
            learning_rate: 5e-3,
            seed: 3,
            ..Default::default()
        }
    }

    /// Two classes distinguished by one planted keyword vector among noise.
    fn planted(n: usize, seed: u64) -> Vec<(SentenceMatrix, usize)> {
        let mut rng = rng::seeded(seed);
        let key = [[1.0, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0]];
        (0..n)
            .map(|i| {
                let label = i % 2;
                let len = rng.random_range(4..9);
                let at = rng.random_range(0..len);
                let mut cols = Vec::new();
                for j in 0..len {
                    if j == at {
                        cols.extend_from_slice(&key[label]);
                    } else {
                        cols.extend((0..4).map(|_| rng.random_range(-0.3..0.3)));
                    }
                }
                (SentenceMatrix::from_columns(4, cols), label)
            })
            .collect()
    }

    #[test]
    fn zero_iterations_returns_initialization() {
        let data = planted(10, 1);
        let out = train_cnn(&small_config(0), &data, None).unwrap();
        assert_eq!(out.model, CnnModel::<f64>::new(small_config(0)).unwrap());
        assert!(out.trace.is_empty());
    }

    #[test]
    fn learns_planted_keyword() {
        let data = planted(200, 2);
        let out = train_cnn(&small_config(500), &data, None).unwrap();
        assert!(accuracy(&out.model, &data).unwrap() >= 0.99);
        assert_eq!(out.trace.len(), 5);
        assert!(out.trace.last().unwrap().loss < out.trace[0].loss);
    }

    #[test]
    fn bit_identical_reruns() {
        let data = planted(40, 3);
        let a = train_cnn(&small_config(60), &data, Some(&data[..10])).unwrap();
        let b = train_cnn(&small_config(60), &data, Some(&data[..10])).unwrap();
        assert_eq!(a.model, b.model);
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.trace[0].step, 60);
        assert!(a.trace[0].valid_accuracy.is_some());
    }

    #[test]
    fn f32_training_runs() {
        let data: Vec<(SentenceMatrix<f32>, usize)> = planted(60, 4)
            .into_iter()
            .map(|(m, y)| {
                let cols = m.as_slice().iter().map(|&x| x as f32).collect();
                (SentenceMatrix::from_columns(4, cols), y)
            })
            .collect();
        let out = train_cnn(&small_config(200), &data, None).unwrap();
        assert!(out.model.params.is_finite());
        assert!(accuracy(&out.model, &data).unwrap() > 0.9);
    }

    #[test]
    fn loss_trace_csv() {
        let mut buf = Vec::new();
        let trace = [LossPoint {
            step: 100,
            loss: 0.5,
            valid_accuracy: None,
        }];
        write_loss_trace(&mut buf, &trace).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,loss\n100,0.5\n");
    }
}
