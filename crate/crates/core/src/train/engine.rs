use std::ops::Range;
use std::time::Instant;

use rayon::prelude::*;

use super::config::{EpochRow, TrainConfig, TrainLog};
use crate::data::{Dataset, SplitIndices};
use crate::error::{invalid, Error, Result};
use crate::model::{argmax_rows, Model};
use crate::nn::{softmax_cross_entropy, sparse_ce_loss, AdamState, Mode};
use crate::rng::{RngState, Stream};
use crate::tensor::{Tape, Tensor};
use crate::vision::{affine_transform, sample_augmentation, ImageU8, Preprocess, SourceOrder};

const EVAL_CHUNK: usize = 64;

/// Aligned outputs of an inference pass over a list of dataset indices.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub predicted: Vec<usize>,
    pub actual: Vec<usize>,
    /// `[N × K]`.
    pub probs: Tensor,
}

/// Consecutive batch ranges over `n` items. A trailing batch smaller than
/// 2 is merged into its predecessor, since batch norm needs two samples.
pub fn batch_boundaries(n: usize, batch_size: usize) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = (0..n).step_by(batch_size.max(1)).map(|s| s..(s + batch_size).min(n)).collect();
    if out.len() > 1 && out.last().is_some_and(|r| r.len() < 2) {
        let last = out.pop().unwrap_or_default();
        if let Some(prev) = out.last_mut() {
            prev.end = last.end;
        }
    }
    out
}

/// Resize, sharpen and channel-convert the images at `indices` once.
fn preprocess_all(data: &Dataset, indices: &[usize], pipeline: &Preprocess, order: SourceOrder) -> Result<Vec<ImageU8>> {
    indices
        .par_iter()
        .map(|&i| pipeline.apply(&data.load_image(i, order.channel_order())?))
        .collect()
}

fn stack(tensors: Vec<Tensor>) -> Result<Tensor> {
    let mut shape = vec![tensors.len()];
    shape.extend_from_slice(tensors.first().map(Tensor::shape).unwrap_or(&[]));
    let data = tensors.into_iter().flat_map(Tensor::into_data).collect();
    Tensor::from_vec(&shape, data)
}

fn infer_images(m: &Model, images: &[ImageU8], pipeline: &Preprocess) -> Result<Tensor> {
    let mut probs = Vec::new();
    let mut k = 0;
    for chunk in images.chunks(EVAL_CHUNK) {
        let inputs = chunk.par_iter().map(|img| pipeline.to_tensor(img)).collect::<Result<Vec<_>>>()?;
        let p = m.infer(&stack(inputs)?)?;
        k = p.shape()[1];
        probs.extend(p.into_data());
    }
    Tensor::from_vec(&[images.len(), k], probs)
}

fn accuracy_pct(predicted: &[usize], actual: &[usize]) -> f64 {
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    100.0 * hits as f64 / actual.len().max(1) as f64
}

/// Inference-mode predictions for `indices`, preprocessed exactly like the
/// non-augmented training path.
pub fn evaluate(m: &Model, data: &Dataset, indices: &[usize], order: SourceOrder) -> Result<Evaluation> {
    if indices.is_empty() {
        return invalid("cannot evaluate an empty index list");
    }
    if let Some(&bad) = indices.iter().find(|&&i| i >= data.len()) {
        return Err(Error::Data(format!("index {bad} outside dataset of {}", data.len())));
    }
    let pipeline = Preprocess::new(m.input_side());
    let images = preprocess_all(data, indices, &pipeline, order)?;
    let probs = infer_images(m, &images, &pipeline)?;
    let labels = data.labels();
    Ok(Evaluation {
        predicted: argmax_rows(&probs)?,
        actual: indices.iter().map(|&i| labels[i]).collect(),
        probs,
    })
}

/// Trains `m` on the train part of `splits` and validates on the
/// validation part after every epoch.
///
/// Each epoch shuffles the training indices with a stream keyed by
/// `(seed, epoch)`; sample `i` is augmented with a stream keyed by
/// `(seed, epoch, i)` and dropout masks of batch `b` come from
/// `(seed, epoch, b)`. Batch assembly runs in parallel but every random
/// draw is keyed, so results do not depend on the worker count.
pub fn train(m: Model, data: &Dataset, splits: &SplitIndices, cfg: &TrainConfig) -> Result<(Model, TrainLog)> {
    let start = Instant::now();
    cfg.validate()?;
    splits.validate(data.len())?;
    let mut m = m;
    match m.num_classes() {
        Some(k) if k == data.num_classes() => {}
        other => {
            return invalid(format!(
                "model outputs {other:?} classes but dataset {} has {}",
                data.name(),
                data.num_classes()
            ))
        }
    }
    if splits.train.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    if splits.validation.is_empty() {
        return Err(Error::Data("validation split is empty".into()));
    }
    m.set_trainable(cfg.trainable_policy)?;
    m.set_class_names(data.class_names().to_vec());

    let pipeline = Preprocess::new(m.input_side());
    let train_imgs = preprocess_all(data, &splits.train, &pipeline, cfg.source_order)?;
    let val_imgs = preprocess_all(data, &splits.validation, &pipeline, cfg.source_order)?;
    let labels = data.labels();
    let val_labels: Vec<usize> = splits.validation.iter().map(|&i| labels[i]).collect();

    let mut adam = AdamState::default();
    let mut log = TrainLog::default();
    for epoch in 1..=cfg.epochs {
        let e = epoch as u64;
        let mut order: Vec<usize> = (0..splits.train.len()).collect();
        RngState::stream(cfg.seed, Stream::Shuffle, e, 0).shuffle(&mut order);

        let (mut loss_sum, mut hits) = (0.0, 0usize);
        for (b, range) in batch_boundaries(order.len(), cfg.batch_size).into_iter().enumerate() {
            let positions = &order[range];
            let inputs = positions
                .par_iter()
                .map(|&pos| {
                    let idx = splits.train[pos];
                    let img = &train_imgs[pos];
                    match &cfg.augment {
                        Some(aug) => {
                            let rng = RngState::stream(cfg.seed, Stream::Augment, e, idx as u64);
                            let (spec, _) = sample_augmentation(aug, rng)?;
                            pipeline.to_tensor(&affine_transform(img, &spec)?)
                        }
                        None => pipeline.to_tensor(img),
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            let batch_labels: Vec<usize> = positions.iter().map(|&pos| labels[splits.train[pos]]).collect();

            let mut tape = Tape::new();
            let x = tape.constant(stack(inputs)?);
            let dropout_rng = RngState::stream(cfg.seed, Stream::Dropout, e, b as u64);
            let pass = m.forward_tape(&mut tape, x, Mode::Train, dropout_rng)?;
            let (loss, probs) = softmax_cross_entropy(&mut tape, pass.logits, &batch_labels)?;
            let loss_value = tape.value(loss).item();
            if !loss_value.is_finite() {
                return Err(Error::Diverged { epoch, batch: b + 1, loss: loss_value });
            }
            tape.backward(loss).map_err(|err| match err {
                Error::NonFinite(_) => Error::Diverged { epoch, batch: b + 1, loss: loss_value },
                other => other,
            })?;
            m.apply_gradients(&tape, &pass, &mut adam, cfg.lr)?;

            loss_sum += loss_value * positions.len() as f64;
            hits += argmax_rows(&probs)?.iter().zip(&batch_labels).filter(|(p, a)| p == a).count();
        }

        let n = order.len() as f64;
        let val_probs = infer_images(&m, &val_imgs, &pipeline)?;
        let val_pred = argmax_rows(&val_probs)?;
        log.rows.push(EpochRow {
            epoch,
            train_loss: loss_sum / n,
            train_acc: 100.0 * hits as f64 / n,
            val_loss: sparse_ce_loss(&val_probs, &val_labels)?,
            val_acc: accuracy_pct(&val_pred, &val_labels),
        });
    }
    log.wall_seconds = start.elapsed().as_secs_f64();
    Ok((m, log))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trailing_singleton_is_merged() {
        assert_eq!(batch_boundaries(65, 32), vec![0..32, 32..65]);
        assert_eq!(batch_boundaries(66, 32), vec![0..32, 32..64, 64..66]);
        assert_eq!(batch_boundaries(64, 32), vec![0..32, 32..64]);
        assert_eq!(batch_boundaries(5, 32), vec![0..5]);
        assert_eq!(batch_boundaries(1, 32), vec![0..1]);
        assert!(batch_boundaries(0, 32).is_empty());
    }

    #[test]
    fn batches_cover_everything_once() {
        for n in 0..100 {
            for bs in 2..9 {
                let b = batch_boundaries(n, bs);
                let covered: Vec<usize> = b.iter().flat_map(|r| r.clone()).collect();
                assert_eq!(covered, (0..n).collect::<Vec<_>>());
                if n >= 2 {
                    assert!(b.iter().all(|r| r.len() >= 2));
                }
            }
        }
    }
}
