use std::time::Instant;

use rayon::prelude::*;

use super::network::Model;
use crate::error::{invalid, Result};
use crate::tensor::Tensor;
use crate::vision::{ImageU8, Preprocess};

/// Images per inference chunk; bounds peak activation memory.
pub(crate) const INFER_CHUNK: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub labels: Vec<usize>,
    /// `[N × K]` class probabilities.
    pub probs: Tensor,
    pub elapsed_seconds: f64,
}

/// Row-wise argmax of a `[N × K]` matrix; ties go to the lower index.
pub fn argmax_rows(probs: &Tensor) -> Result<Vec<usize>> {
    let [_, k] = probs.shape() else {
        return invalid(format!("argmax expects a matrix, got {:?}", probs.shape()));
    };
    if *k == 0 {
        return invalid("argmax over zero columns");
    }
    Ok(probs
        .data()
        .chunks(*k)
        .map(|row| {
            let mut best = 0;
            for (j, &v) in row.iter().enumerate().skip(1) {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Stacks `[C×H×W]` tensors into one `[N×C×H×W]` batch.
pub(crate) fn stack(items: &[Tensor]) -> Result<Tensor> {
    let Some(first) = items.first() else {
        return invalid("cannot stack an empty batch");
    };
    let mut shape = vec![items.len()];
    shape.extend_from_slice(first.shape());
    let mut data = Vec::with_capacity(items.len() * first.len());
    for t in items {
        if t.shape() != first.shape() {
            return invalid(format!("batch items disagree: {:?} vs {:?}", t.shape(), first.shape()));
        }
        data.extend_from_slice(t.data());
    }
    Tensor::from_vec(&shape, data)
}

/// Inference-mode probabilities for preprocessed `[C×H×W]` inputs, in chunks.
pub(crate) fn infer_all(m: &Model, inputs: &[Tensor]) -> Result<Tensor> {
    let mut probs = Vec::new();
    let mut k = 0;
    for chunk in inputs.chunks(INFER_CHUNK) {
        let p = m.infer(&stack(chunk)?)?;
        k = p.shape()[1];
        probs.extend(p.into_data());
    }
    Tensor::from_vec(&[inputs.len(), k], probs)
}

/// Preprocesses `images`, runs an inference-mode forward pass and returns
/// argmax labels with the wall-clock time of the whole call.
pub fn predict(m: &Model, images: &[ImageU8], pipeline: &Preprocess) -> Result<Prediction> {
    if pipeline.size != m.input_side() {
        return invalid(format!(
            "pipeline produces {}px images but the model expects {}px",
            pipeline.size,
            m.input_side()
        ));
    }
    if images.is_empty() {
        return invalid("no images to predict");
    }
    let start = Instant::now();
    let inputs = images.par_iter().map(|img| pipeline.run(img)).collect::<Result<Vec<_>>>()?;
    let probs = infer_all(m, &inputs)?;
    let labels = argmax_rows(&probs)?;
    let elapsed_seconds = start.elapsed().as_secs_f64().max(f64::MIN_POSITIVE);
    Ok(Prediction { labels, probs, elapsed_seconds })
}
