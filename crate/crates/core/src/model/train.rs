use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Head, Model, TaskKind};
use crate::autodiff::forward_backward;
use crate::contour::Contour;
use crate::data::{split_indices, DatasetRecord, SplitSpec};
use crate::error::{Error, Result};
use crate::optim::{compute_loss, AdamState, LossSpec, Target};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub task: TaskKind,
    pub lr: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub val_fraction: f64,
}

impl TrainConfig {
    /// Per-task defaults: classification 5e-4 / 128 / 200 epochs, curvature
    /// regression 3e-3 / 32 / 100, reconstruction 1e-3 / 32 / 200.
    pub fn for_task(task: TaskKind) -> Self {
        let (lr, batch_size, epochs) = match task {
            TaskKind::Classify => (5e-4, 128, 200),
            TaskKind::Regress => (3e-3, 32, 100),
            TaskKind::Autoencode => (1e-3, 32, 200),
        };
        TrainConfig {
            task,
            lr,
            batch_size,
            epochs,
            seed: 0,
            val_fraction: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return Err(Error::invalid(format!("learning rate must be finite and >= 0, got {}", self.lr)));
        }
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be positive"));
        }
        SplitSpec::new(self.val_fraction, self.seed).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean loss over the epoch's training examples, each taken before the
    /// update of its batch.
    pub train_loss: f64,
    pub val_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct History {
    pub epochs: Vec<EpochStats>,
    pub best_epoch: Option<usize>,
    pub train_size: usize,
    pub val_size: usize,
}

impl History {
    pub fn best_val_loss(&self) -> Option<f64> {
        self.best_epoch.map(|e| self.epochs[e].val_loss)
    }
}

enum OwnedTarget {
    Class(usize),
    Real(Vec<f64>),
    Contour(Contour),
}

struct Example<'a> {
    input: Contour,
    extra: &'a [f64],
    target: OwnedTarget,
    // converts the loss back to the record's units
    weight: f64,
}

impl Example<'_> {
    fn target(&self) -> Target<'_> {
        match &self.target {
            OwnedTarget::Class(c) => Target::Class(*c),
            OwnedTarget::Real(v) => Target::Real(v),
            OwnedTarget::Contour(c) => Target::Contour(c),
        }
    }
}

fn prepare<'a>(model: &Model, record: &'a DatasetRecord) -> Result<Example<'a>> {
    let (input, scale) = model.prepare(&record.contour)?;
    let extra = model.record_extra(record)?;
    model.check_input(&input, extra)?;
    let target = match model.meta().task {
        TaskKind::Classify => {
            let label = record
                .label
                .ok_or_else(|| Error::Dataset(format!("record '{}' has no label", record.id)))?;
            if let Head::Affine { outputs, .. } = model.head() {
                if label >= outputs {
                    return Err(Error::Dataset(format!(
                        "record '{}' has label {label} but the model has {outputs} classes",
                        record.id
                    )));
                }
            }
            OwnedTarget::Class(label)
        }
        TaskKind::Regress => OwnedTarget::Real(
            record
                .node_targets
                .as_ref()
                .ok_or_else(|| Error::Dataset(format!("record '{}' has no node targets", record.id)))?
                .iter()
                .map(|t| t * scale)
                .collect(),
        ),
        TaskKind::Autoencode => OwnedTarget::Contour(input.clone()),
    };
    let weight = if model.meta().task == TaskKind::Regress {
        1.0 / scale
    } else {
        1.0
    };
    Ok(Example {
        input,
        extra,
        target,
        weight,
    })
}

fn mean_loss(model: &Model, loss: &LossSpec, examples: &[Example<'_>]) -> Result<f64> {
    let mut total = 0.0;
    for e in examples {
        total += e.weight * compute_loss(loss, &model.forward(&e.input, e.extra)?, &e.target())?;
    }
    Ok(total / examples.len() as f64)
}

/// Minibatch Adam on `records` with a held-out validation split. Returns the
/// parameters from the epoch with the lowest validation loss. With a single
/// record, that record serves for both training and validation.
///
/// Regression losses are measured in the records' units, so they match
/// [`evaluate`](super::evaluate) with the mean absolute error.
pub fn fit(mut model: Model, records: &[DatasetRecord], cfg: &TrainConfig) -> Result<(Model, History)> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(Error::Dataset("cannot train on an empty dataset".into()));
    }
    if cfg.task != model.meta().task {
        return Err(Error::invalid(format!(
            "config task '{}' does not match the model's task '{}'",
            cfg.task.name(),
            model.meta().task.name()
        )));
    }
    let (train_idx, val_idx) = if records.len() == 1 {
        (vec![0], vec![0])
    } else {
        split_indices(records.len(), &SplitSpec::new(cfg.val_fraction, cfg.seed)?)?
    };
    let prep = |idx: &[usize]| -> Result<Vec<Example<'_>>> {
        idx.iter().map(|&i| prepare(&model, &records[i])).collect()
    };
    let train = prep(&train_idx)?;
    let val = prep(&val_idx)?;
    let loss = LossSpec::new(cfg.task.loss());

    let mut adam = AdamState::new(model.num_params(), cfg.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(1);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut history = History {
        train_size: train.len(),
        val_size: val.len(),
        ..Default::default()
    };
    let mut best: Option<(f64, Vec<f64>)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for (batch, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let mut grad = vec![0.0; model.num_params()];
            let mut batch_loss = 0.0;
            for &i in chunk {
                let e = &train[i];
                let (l, g) = forward_backward(&model, &e.input, e.extra, &loss, &e.target())?;
                batch_loss += e.weight * l;
                for (a, b) in grad.iter_mut().zip(&g) {
                    *a += e.weight * b;
                }
            }
            if !batch_loss.is_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch });
            }
            epoch_loss += batch_loss;
            let scale = 1.0 / chunk.len() as f64;
            for g in &mut grad {
                *g *= scale;
            }
            adam.step(model.params_mut().values_mut(), &grad)?;
            model.params_mut().clamp_constrained();
        }
        let val_loss = mean_loss(&model, &loss, &val)?;
        if !val_loss.is_finite() {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: usize::MAX,
            });
        }
        let stats = EpochStats {
            epoch,
            train_loss: epoch_loss / train.len() as f64,
            val_loss,
        };
        log::info!(
            "epoch {epoch}: train loss {:.6}, validation loss {:.6}",
            stats.train_loss,
            stats.val_loss
        );
        history.epochs.push(stats);
        if best.as_ref().is_none_or(|(b, _)| val_loss < *b) {
            best = Some((val_loss, model.params().values().to_vec()));
            history.best_epoch = Some(epoch);
        }
    }
    if let Some((_, params)) = best {
        model.params_mut().set_values(&params);
    }
    Ok((model, history))
}
