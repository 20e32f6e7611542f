use std::rc::Rc;

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::NormalizedAdjacency;
use crate::encoder::{encode_views, DualEmbedding, Encoder};
use crate::error::{Error, Result};
use crate::geometry;
use crate::grad::{Tape, Tensor, Var};
use crate::manifold::Manifold;

use super::config::TrainConfig;

/// Two encoders and a linear head on the concatenated origin-tangent
/// coordinates of both views.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub alpha: Encoder,
    pub beta: Encoder,
    /// `2·embed_dim × n_classes`
    pub decoder_weight: Tensor,
    /// `1 × n_classes`
    pub decoder_bias: Tensor,
}

impl Model {
    pub fn init(d_in: usize, n_classes: usize, cfg: &TrainConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        if n_classes == 0 {
            return Err(Error::Config("need at least one class".into()));
        }
        let enc = cfg.encoder();
        let alpha = Encoder::init(d_in, cfg.manifold_alpha()?, &enc, rng)?;
        let beta = Encoder::init(d_in, cfg.manifold_beta()?, &enc, rng)?;
        let d = 2 * cfg.embed_dim;
        let s = 1.0 / (d as f64).sqrt();
        let w = Array2::from_shape_simple_fn((d, n_classes), || rng.random_range(-s..=s));
        Ok(Self {
            alpha,
            beta,
            decoder_weight: Tensor::new(w),
            decoder_bias: Tensor::new(Array2::zeros((1, n_classes))),
        })
    }

    pub fn n_classes(&self) -> usize {
        self.decoder_bias.value.ncols()
    }

    /// Alpha encoder, beta encoder, then decoder weight and bias.
    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.alpha.params_mut();
        p.extend(self.beta.params_mut());
        p.push(&mut self.decoder_weight);
        p.push(&mut self.decoder_bias);
        p
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.alpha.params();
        p.extend(self.beta.params());
        p.push(&self.decoder_weight);
        p.push(&self.decoder_bias);
        p
    }

    pub fn embed(&self, x: &Array2<f64>, adj: &NormalizedAdjacency) -> Result<DualEmbedding> {
        encode_views(x, adj, &self.alpha, &self.beta)
    }

    pub fn logits(&self, x: &Array2<f64>, adj: &NormalizedAdjacency) -> Result<Array2<f64>> {
        let emb = self.embed(x, adj)?;
        decode(&emb, &self.decoder_weight.value, &self.decoder_bias.value)
    }

    pub fn predict(&self, x: &Array2<f64>, adj: &NormalizedAdjacency) -> Result<Vec<usize>> {
        Ok(argmax_rows(&self.logits(x, adj)?))
    }
}

pub(crate) fn argmax_rows(a: &Array2<f64>) -> Vec<usize> {
    a.rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (j, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = j;
                }
            }
            best
        })
        .collect()
}

pub fn decode_var<'t>(
    ha: Var<'t>,
    hb: Var<'t>,
    ma: &Manifold,
    mb: &Manifold,
    w: Var<'t>,
    b: Var<'t>,
) -> Var<'t> {
    geometry::log0(ma, ha)
        .concat_cols(geometry::log0(mb, hb))
        .matmul(w)
        .add(b)
}

/// `concat(log_o H^α, log_o H^β) · W + b`
pub fn decode(emb: &DualEmbedding, w: &Array2<f64>, b: &Array2<f64>) -> Result<Array2<f64>> {
    let d = emb.manifold_alpha.dim() + emb.manifold_beta.dim();
    if w.nrows() != d || b.nrows() != 1 || b.ncols() != w.ncols() {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: w.nrows(),
        });
    }
    let tape = Tape::new();
    let out = decode_var(
        tape.constant(emb.alpha.clone()),
        tape.constant(emb.beta.clone()),
        &emb.manifold_alpha,
        &emb.manifold_beta,
        tape.constant(w.clone()),
        tape.constant(b.clone()),
    );
    tape.check()?;
    let v = out.value().to_owned();
    Ok(v)
}

/// Mean negative log-likelihood over `ids`, recorded on the tape.
pub fn cross_entropy_var<'t>(logits: Var<'t>, labels: &[usize], ids: &Rc<[usize]>) -> Var<'t> {
    let c = logits.shape().1;
    let mut onehot = Array2::zeros((ids.len(), c));
    for (r, &i) in ids.iter().enumerate() {
        onehot[[r, labels[i]]] = 1.0;
    }
    let tape = logits.tape();
    logits
        .log_softmax()
        .gather_rows(Rc::clone(ids))
        .mul(tape.constant(onehot))
        .sum()
        .scale(-1.0 / ids.len() as f64)
}

/// Mean cross-entropy of `logits` over the nodes selected by `mask`.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[usize], mask: &[bool]) -> Result<f64> {
    let ids: Rc<[usize]> = mask_to_ids(mask)?;
    if labels.len() != logits.nrows() || mask.len() != logits.nrows() {
        return Err(Error::DimensionMismatch {
            expected: logits.nrows(),
            got: labels.len().min(mask.len()),
        });
    }
    if let Some(&bad) = ids.iter().find(|&&i| labels[i] >= logits.ncols()) {
        return Err(Error::Config(format!("label of node {bad} exceeds the number of classes")));
    }
    let tape = Tape::new();
    let out = cross_entropy_var(tape.constant(logits.clone()), labels, &ids);
    tape.check()?;
    Ok(out.item())
}

/// `CE(train) + λ_c · hpc`
pub fn total_loss(logits: &Array2<f64>, labels: &[usize], train_mask: &[bool], hpc_value: f64, lambda_c: f64) -> Result<f64> {
    Ok(cross_entropy(logits, labels, train_mask)? + lambda_c * hpc_value)
}

pub(crate) fn mask_to_ids(mask: &[bool]) -> Result<Rc<[usize]>> {
    let ids: Rc<[usize]> = mask
        .iter()
        .enumerate()
        .filter_map(|(i, &b)| b.then_some(i))
        .collect();
    if ids.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(ids)
}
