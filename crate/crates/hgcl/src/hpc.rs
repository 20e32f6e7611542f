//! Hyperbolic position consistency: a Jensen-Shannon style contrastive
//! objective between two hyperbolic views.
//!
//! For an anchor `i` in view α:
//!
//! ```text
//! MI_cons(i) = log D(h_i^α, t(h_i^β)) + λ_n Σ_{j ∈ inter(i)} log(1 − D(h_i^α, t(h_j^β)))
//! MI_tol(i)  = Σ_{j ∈ N(i)} log D(h_i^α, h_j^α) + λ_n Σ_{j ∈ intra(i)} log(1 − D(h_i^α, h_j^α))
//! ```
//!
//! with `t` transferring β-points into α, and symmetrically for view β. The
//! loss is `−(1/2n) Σ_i [MI_cons^α + MI_cons^β + MI_tol^α + MI_tol^β]`.
//! The discriminator is `D = σ((b − d)/τ)` on the hyperbolic distance `d`,
//! clamped to `[1e-7, 1 − 1e-7]` before any logarithm.

use std::rc::Rc;

use ndarray::Array2;
use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::encoder::DualEmbedding;
use crate::error::{Error, Result};
use crate::geometry;
use crate::grad::{compensated_sum, sigmoid, Tape, Var};
use crate::manifold::{self, Manifold, Point};

/// Discriminator outputs are clamped to `[PROB_EPS, 1 − PROB_EPS]`.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HpcConfig {
    /// Weight of the negative terms.
    pub lambda_n: f64,
    /// Negatives per anchor and source (intra-view and inter-view).
    pub m: usize,
    /// Distance at which the discriminator outputs 0.5.
    pub bias: f64,
    pub temperature: f64,
}

impl Default for HpcConfig {
    fn default() -> Self {
        Self {
            lambda_n: 0.5,
            m: 5,
            bias: 2.0,
            temperature: 1.0,
        }
    }
}

impl HpcConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature > 0.0) {
            return Err(Error::Config(format!("temperature must be > 0, got {}", self.temperature)));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if !(self.lambda_n >= 0.0) {
            return Err(Error::Config(format!("lambda_n must be >= 0, got {}", self.lambda_n)));
        }
        if !self.bias.is_finite() {
            return Err(Error::Config("discriminator bias must be finite".into()));
        }
        Ok(())
    }
}

/// How pairs are scored before the sigmoid.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    /// `(b − d(x, y)) / τ`
    #[default]
    Distance,
    /// `(b + ⟨log_o x, log_o y⟩) / τ`
    TangentInner,
}

/// Which groups of terms enter the loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HpcTerms {
    pub consistency: bool,
    pub tolerance: bool,
}

impl Default for HpcTerms {
    fn default() -> Self {
        Self {
            consistency: true,
            tolerance: true,
        }
    }
}

/// Positives and negatives for every anchor. The consistency positive of
/// anchor `i` is node `i` in the other view; the tolerance positives are its
/// one-hop neighbours. The same ids are used for both views.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub tolerance: Vec<Vec<usize>>,
    pub intra: Vec<Vec<usize>>,
    pub inter: Vec<Vec<usize>>,
}

impl SamplePlan {
    pub fn n_nodes(&self) -> usize {
        self.tolerance.len()
    }

    /// Uses the given lists verbatim. Panics unless all three cover the same
    /// number of nodes.
    pub fn new(tolerance: Vec<Vec<usize>>, intra: Vec<Vec<usize>>, inter: Vec<Vec<usize>>) -> Self {
        assert!(tolerance.len() == intra.len() && intra.len() == inter.len());
        Self {
            tolerance,
            intra,
            inter,
        }
    }
}

/// Draws `m` intra-view and `m` inter-view negatives per anchor, uniformly
/// without replacement from the nodes that are neither the anchor nor one of
/// its neighbours.
pub fn build_sample_plan<R: Rng>(neighbors: &[Vec<usize>], m: usize, rng: &mut R) -> Result<SamplePlan> {
    let n = neighbors.len();
    let mut intra = Vec::with_capacity(n);
    let mut inter = Vec::with_capacity(n);
    let mut excluded = vec![false; n];
    for (i, nb) in neighbors.iter().enumerate() {
        excluded[i] = true;
        for &j in nb {
            excluded[j] = true;
        }
        let pool: Vec<usize> = (0..n).filter(|&j| !excluded[j]).collect();
        excluded[i] = false;
        for &j in nb {
            excluded[j] = false;
        }
        if pool.len() < m {
            return Err(Error::PoolTooSmall {
                anchor: i,
                available: pool.len(),
                requested: m,
            });
        }
        for out in [&mut intra, &mut inter] {
            let picks = sample(rng, pool.len(), m);
            out.push(picks.iter().map(|k| pool[k]).collect::<Vec<_>>());
        }
    }
    Ok(SamplePlan {
        tolerance: neighbors.to_vec(),
        intra,
        inter,
    })
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PROB_EPS, 1.0 - PROB_EPS)
}

fn score(m: &Manifold, x: &Point, y: &Point, cfg: &HpcConfig, sim: Similarity) -> Result<f64> {
    match sim {
        Similarity::Distance => Ok((cfg.bias - m.distance(x, y)?) / cfg.temperature),
        Similarity::TangentInner => {
            let o = m.origin();
            let u = m.origin_tangent_coords(&m.log_map(&o, x)?);
            let v = m.origin_tangent_coords(&m.log_map(&o, y)?);
            Ok((cfg.bias + u.dot(&v)) / cfg.temperature)
        }
    }
}

/// `σ((b − d(x, y)) / τ)`, clamped to `[1e-7, 1 − 1e-7]`.
pub fn discriminator(m: &Manifold, x: &Point, y: &Point, cfg: &HpcConfig) -> Result<f64> {
    discriminator_with(m, x, y, cfg, Similarity::Distance)
}

pub fn discriminator_with(m: &Manifold, x: &Point, y: &Point, cfg: &HpcConfig, sim: Similarity) -> Result<f64> {
    if x.manifold != *m || y.manifold != *m {
        return Err(Error::ManifoldMismatch);
    }
    Ok(clamp_prob(sigmoid(score(m, x, y, cfg, sim)?)))
}

/// Consistency estimator for `anchor` (a point of the anchor's view) against
/// `other`, the full other view; the other view is transferred into the
/// anchor's manifold before scoring.
pub fn mi_consistency(
    anchor: usize,
    own: &[Point],
    other: &[Point],
    plan: &SamplePlan,
    cfg: &HpcConfig,
) -> Result<f64> {
    mi_consistency_with(anchor, own, other, plan, cfg, Similarity::Distance)
}

pub fn mi_consistency_with(
    anchor: usize,
    own: &[Point],
    other: &[Point],
    plan: &SamplePlan,
    cfg: &HpcConfig,
    sim: Similarity,
) -> Result<f64> {
    let h = &own[anchor];
    let m = h.manifold;
    let pos = manifold::transfer(&other[anchor], &m)?;
    let mut total = discriminator_with(&m, h, &pos, cfg, sim)?.ln();
    let mut neg = Vec::with_capacity(plan.inter[anchor].len());
    for &j in &plan.inter[anchor] {
        let t = manifold::transfer(&other[j], &m)?;
        neg.push((1.0 - discriminator_with(&m, h, &t, cfg, sim)?).ln());
    }
    total += cfg.lambda_n * compensated_sum(&neg);
    Ok(total)
}

/// Tolerance estimator: neighbours as positives, intra-view negatives.
pub fn mi_tolerance(anchor: usize, own: &[Point], plan: &SamplePlan, cfg: &HpcConfig) -> Result<f64> {
    mi_tolerance_with(anchor, own, plan, cfg, Similarity::Distance)
}

pub fn mi_tolerance_with(
    anchor: usize,
    own: &[Point],
    plan: &SamplePlan,
    cfg: &HpcConfig,
    sim: Similarity,
) -> Result<f64> {
    let h = &own[anchor];
    let m = h.manifold;
    let mut pos = Vec::new();
    for &j in &plan.tolerance[anchor] {
        pos.push(discriminator_with(&m, h, &own[j], cfg, sim)?.ln());
    }
    let mut neg = Vec::new();
    for &j in &plan.intra[anchor] {
        neg.push((1.0 - discriminator_with(&m, h, &own[j], cfg, sim)?).ln());
    }
    Ok(compensated_sum(&pos) + cfg.lambda_n * compensated_sum(&neg))
}

/// Pair scores of one view grouped by role; the loss is a function of these
/// alone. Used to state and test monotonicity without geometry.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PairDistances {
    pub consistency_pos: Vec<f64>,
    pub consistency_neg: Vec<f64>,
    pub tolerance_pos: Vec<f64>,
    pub tolerance_neg: Vec<f64>,
}

/// Loss from per-pair distances of both views (`views` holds α then β).
pub fn loss_from_distances(views: &[PairDistances], n_nodes: usize, cfg: &HpcConfig) -> f64 {
    let log_d = |d: &f64| clamp_prob(sigmoid((cfg.bias - d) / cfg.temperature)).ln();
    let log_1md = |d: &f64| (1.0 - clamp_prob(sigmoid((cfg.bias - d) / cfg.temperature))).ln();
    let mut parts = Vec::new();
    for v in views {
        let pos: Vec<f64> = v.consistency_pos.iter().chain(&v.tolerance_pos).map(log_d).collect();
        let neg: Vec<f64> = v.consistency_neg.iter().chain(&v.tolerance_neg).map(log_1md).collect();
        parts.push(compensated_sum(&pos));
        parts.push(cfg.lambda_n * compensated_sum(&neg));
    }
    -compensated_sum(&parts) / (2.0 * n_nodes as f64)
}

/// Row-index lists for one view's pair groups.
struct PairIndex {
    cons_neg: (Rc<[usize]>, Rc<[usize]>),
    tol_pos: (Rc<[usize]>, Rc<[usize]>),
    tol_neg: (Rc<[usize]>, Rc<[usize]>),
}

fn flatten(lists: &[Vec<usize>]) -> (Rc<[usize]>, Rc<[usize]>) {
    let mut a = Vec::new();
    let mut b = Vec::new();
    for (i, l) in lists.iter().enumerate() {
        for &j in l {
            a.push(i);
            b.push(j);
        }
    }
    (a.into(), b.into())
}

impl PairIndex {
    fn new(plan: &SamplePlan) -> Self {
        Self {
            cons_neg: flatten(&plan.inter),
            tol_pos: flatten(&plan.tolerance),
            tol_neg: flatten(&plan.intra),
        }
    }
}

/// Options shared by the tape loss and the ablations.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct HpcOptions {
    pub similarity: Similarity,
    pub terms: HpcTerms,
}

fn log_d<'t>(s: Var<'t>) -> Var<'t> {
    s.sigmoid().clamp(PROB_EPS, 1.0 - PROB_EPS).ln()
}

fn log_1md<'t>(s: Var<'t>) -> Var<'t> {
    s.sigmoid()
        .clamp(PROB_EPS, 1.0 - PROB_EPS)
        .neg()
        .add_scalar(1.0)
        .ln()
}

fn pair_scores<'t>(
    m: &Manifold,
    a: Var<'t>,
    b: Var<'t>,
    rows: &(Rc<[usize]>, Rc<[usize]>),
    cfg: &HpcConfig,
    sim: Similarity,
) -> Option<Var<'t>> {
    if rows.0.is_empty() {
        return None;
    }
    let x = a.gather_rows(Rc::clone(&rows.0));
    let y = b.gather_rows(Rc::clone(&rows.1));
    Some(scores(m, x, y, cfg, sim))
}

fn scores<'t>(m: &Manifold, x: Var<'t>, y: Var<'t>, cfg: &HpcConfig, sim: Similarity) -> Var<'t> {
    match sim {
        Similarity::Distance => geometry::distance(m, x, y)
            .neg()
            .add_scalar(cfg.bias)
            .scale(1.0 / cfg.temperature),
        Similarity::TangentInner => geometry::tangent_inner(m, x, y)
            .add_scalar(cfg.bias)
            .scale(1.0 / cfg.temperature),
    }
}

/// Records the loss on `tape`. `ha`, `hb` hold one point per row on `ma`, `mb`.
#[allow(clippy::too_many_arguments)]
pub fn hpc_loss_var<'t>(
    tape: &'t Tape,
    ha: Var<'t>,
    hb: Var<'t>,
    ma: &Manifold,
    mb: &Manifold,
    plan: &SamplePlan,
    cfg: &HpcConfig,
    opts: HpcOptions,
) -> Var<'t> {
    let n = ha.shape().0;
    let idx = PairIndex::new(plan);
    let mut pos_terms: Vec<Var<'t>> = Vec::new();
    let mut neg_terms: Vec<Var<'t>> = Vec::new();
    for (own, other, m_own, m_other) in [(ha, hb, ma, mb), (hb, ha, mb, ma)] {
        if opts.terms.consistency {
            let moved = geometry::transfer(m_other, m_own, other);
            pos_terms.push(log_d(scores(m_own, own, moved, cfg, opts.similarity)).sum());
            if let Some(s) = pair_scores(m_own, own, moved, &idx.cons_neg, cfg, opts.similarity) {
                neg_terms.push(log_1md(s).sum());
            }
        }
        if opts.terms.tolerance {
            if let Some(s) = pair_scores(m_own, own, own, &idx.tol_pos, cfg, opts.similarity) {
                pos_terms.push(log_d(s).sum());
            }
            if let Some(s) = pair_scores(m_own, own, own, &idx.tol_neg, cfg, opts.similarity) {
                neg_terms.push(log_1md(s).sum());
            }
        }
    }
    let mut total = tape.scalar(0.0);
    for t in pos_terms {
        total = total.add(t);
    }
    for t in neg_terms {
        total = total.add(t.scale(cfg.lambda_n));
    }
    total.scale(-1.0 / (2.0 * n as f64))
}

/// Loss value for fixed embeddings.
pub fn hpc_loss(emb: &DualEmbedding, plan: &SamplePlan, cfg: &HpcConfig) -> Result<f64> {
    hpc_loss_with(emb, plan, cfg, HpcOptions::default())
}

pub fn hpc_loss_with(emb: &DualEmbedding, plan: &SamplePlan, cfg: &HpcConfig, opts: HpcOptions) -> Result<f64> {
    cfg.validate()?;
    if plan.n_nodes() != emb.n_nodes() {
        return Err(Error::DimensionMismatch {
            expected: emb.n_nodes(),
            got: plan.n_nodes(),
        });
    }
    let tape = Tape::new();
    let ha = tape.constant(emb.alpha.clone());
    let hb = tape.constant(emb.beta.clone());
    let out = hpc_loss_var(&tape, ha, hb, &emb.manifold_alpha, &emb.manifold_beta, plan, cfg, opts);
    tape.check()?;
    Ok(out.item())
}

/// Gradients of the loss w.r.t. both embedding matrices.
pub fn hpc_loss_grad(
    emb: &DualEmbedding,
    plan: &SamplePlan,
    cfg: &HpcConfig,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let tape = Tape::new();
    let ha = tape.var(emb.alpha.clone());
    let hb = tape.var(emb.beta.clone());
    let out = hpc_loss_var(
        &tape,
        ha,
        hb,
        &emb.manifold_alpha,
        &emb.manifold_beta,
        plan,
        cfg,
        HpcOptions::default(),
    );
    let g = tape.backward(out)?;
    Ok((out.item(), g.wrt(ha), g.wrt(hb)))
}
