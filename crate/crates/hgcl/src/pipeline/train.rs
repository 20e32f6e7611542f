use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_adjacency, Graph};
use crate::error::{Error, Result};
use crate::grad::{Adam, AdamConfig, Tape};
use crate::hpc::{build_sample_plan, hpc_loss_var};

use super::config::{TrainConfig, ValMetric};
use super::metrics::classification_metrics;
use super::model::{argmax_rows, cross_entropy, cross_entropy_var, decode_var, mask_to_ids, Model};

/// Negative sampling draws from its own stream so that the parameter
/// initialisation does not depend on whether the contrastive term is on.
const NEGATIVE_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub task_loss: f64,
    pub hpc_loss: f64,
    pub total_loss: f64,
    pub val_metric: f64,
    /// Cross-entropy on the validation mask; breaks ties in `val_metric`.
    pub val_loss: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best validation metric.
    pub model: Model,
    pub best_epoch: usize,
    pub best_val: f64,
    pub history: Vec<EpochRecord>,
    /// How many negative-sample plans were drawn.
    pub plan_builds: usize,
}

/// Full-batch training with Adam and early stopping on the validation mask.
/// An epoch improves on the best so far when its validation metric is
/// higher, or equal with a lower validation loss.
///
/// The validation metric of epoch `e` is measured on the parameters that
/// produced epoch `e`'s loss, before that epoch's update.
pub fn train(graph: &Graph, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    graph.validate()?;
    let train_ids = mask_to_ids(&graph.train_mask)?;
    mask_to_ids(&graph.val_mask)?;
    let adj = normalize_adjacency(graph);
    let neighbors = graph.neighbors();
    let n_classes = graph.n_classes();

    let mut init_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut neg_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    neg_rng.set_stream(NEGATIVE_STREAM);

    let mut model = Model::init(graph.n_features(), n_classes, cfg, &mut init_rng)?;
    let ma = model.alpha.output_manifold();
    let mb = model.beta.output_manifold();
    let mut adam = Adam::new(AdamConfig {
        lr: cfg.lr,
        clip: cfg.clip,
        ..AdamConfig::default()
    });
    let opts = cfg.ablation.hpc_options();
    let contrastive = cfg.contrastive();

    let mut history = Vec::new();
    let mut best: Option<(usize, f64, f64, Model)> = None;
    let mut plan_builds = 0;

    for epoch in 0..cfg.epochs {
        let tape = Tape::new();
        let vars: Vec<_> = model.params().into_iter().map(|p| tape.param(p)).collect();
        let na = model.alpha.params().len();
        let nb = model.beta.params().len();
        let ha = model.alpha.forward_var(&tape, &graph.features, &adj, &vars[..na])?;
        let hb = model.beta.forward_var(&tape, &graph.features, &adj, &vars[na..na + nb])?;
        let logits = decode_var(ha, hb, &ma, &mb, vars[na + nb], vars[na + nb + 1]);
        let task = cross_entropy_var(logits, &graph.labels, &train_ids);
        let (total, hpc) = if contrastive {
            let plan = build_sample_plan(&neighbors, cfg.hpc.m, &mut neg_rng)?;
            plan_builds += 1;
            let h = hpc_loss_var(&tape, ha, hb, &ma, &mb, &plan, &cfg.hpc, opts);
            (task.add(h.scale(cfg.lambda_c)), Some(h))
        } else {
            (task, None)
        };

        let task_loss = task.item();
        let hpc_loss = hpc.map_or(0.0, |h| h.item());
        let total_loss = total.item();
        if !total_loss.is_finite() {
            return Err(Error::DivergedLoss {
                epoch,
                task: task_loss,
                hpc: hpc_loss,
            });
        }
        tape.check()?;

        let logit_values = logits.value().to_owned();
        let val_loss = cross_entropy(&logit_values, &graph.labels, &graph.val_mask)?;
        let pred = argmax_rows(&logit_values);
        let m = classification_metrics(&pred, &graph.labels, &graph.val_mask, n_classes)?;
        let val_metric = match cfg.val_metric {
            ValMetric::Accuracy => m.accuracy,
            ValMetric::F1 => m.macro_f1,
        };
        history.push(EpochRecord {
            epoch,
            task_loss,
            hpc_loss,
            total_loss,
            val_metric,
            val_loss,
        });
        let improved = best
            .as_ref()
            .is_none_or(|b| val_metric > b.1 || (val_metric == b.1 && val_loss < b.2));
        if improved {
            best = Some((epoch, val_metric, val_loss, model.clone()));
        }

        let grads = tape.backward(total)?;
        let mut params = model.params_mut();
        for (p, v) in params.iter_mut().zip(&vars) {
            p.grad = Some(grads.wrt(*v));
        }
        adam.step(&mut params);

        let best_epoch = best.as_ref().map_or(0, |b| b.0);
        if epoch - best_epoch >= cfg.patience {
            break;
        }
    }

    let (best_epoch, best_val, _, best_model) = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        model: best_model,
        best_epoch,
        best_val,
        history,
        plan_builds,
    })
}
