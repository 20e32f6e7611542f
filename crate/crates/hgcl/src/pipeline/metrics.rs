use serde::{Deserialize, Serialize};

use crate::data::{normalize_adjacency, Graph};
use crate::error::{Error, Result};

use super::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy and macro-F1 of `pred` against `truth` over nodes where `mask`
/// is set. Every one of the `n_classes` classes counts in the F1 average,
/// including classes with no support in the mask.
pub fn classification_metrics(pred: &[usize], truth: &[usize], mask: &[bool], n_classes: usize) -> Result<Metrics> {
    if pred.len() != truth.len() || mask.len() != truth.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: pred.len().min(mask.len()),
        });
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fn_ = vec![0usize; n_classes];
    let mut total = 0usize;
    let mut correct = 0usize;
    for i in (0..truth.len()).filter(|&i| mask[i]) {
        let (p, t) = (pred[i], truth[i]);
        if p >= n_classes || t >= n_classes {
            return Err(Error::Config(format!("class id out of range at node {i}")));
        }
        total += 1;
        if p == t {
            correct += 1;
            tp[t] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyMask);
    }
    let f1_sum: f64 = (0..n_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(Metrics {
        accuracy: correct as f64 / total as f64,
        macro_f1: f1_sum / n_classes.max(1) as f64,
    })
}

pub fn evaluate(model: &Model, graph: &Graph, mask: &[bool]) -> Result<Metrics> {
    let adj = normalize_adjacency(graph);
    let pred = model.predict(&graph.features, &adj)?;
    classification_metrics(&pred, &graph.labels, mask, model.n_classes())
}
