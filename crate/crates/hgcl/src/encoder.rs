//! Hyperbolic GNN encoders.
//!
//! A layer maps points `H` to `exp_o(act(A_norm · log_o(H) · W + b))`:
//! neighbours are aggregated in the tangent space at the origin, the affine
//! map and activation act there, and the result is pushed back with `exp_o`.
//! Weights are ordinary Euclidean matrices.

use ndarray::{Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::NormalizedAdjacency;
use crate::error::{Error, Result};
use crate::geometry;
use crate::grad::{Tape, Tensor, Var};
use crate::manifold::Manifold;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Relu,
    None,
}

impl Activation {
    fn apply<'t>(self, x: Var<'t>) -> Var<'t> {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Relu => x.relu(),
            Activation::None => x,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HgnnLayer {
    /// `d_in × d_out`
    pub weight: Tensor,
    /// `1 × d_out`
    pub bias: Tensor,
    /// Output manifold; the input manifold has the same model and curvature
    /// with dimension `d_in`.
    pub manifold: Manifold,
    pub activation: Activation,
}

impl HgnnLayer {
    /// Uniform `[-s, s]` weights with `s = 1/√d_in`, zero bias.
    pub fn init(d_in: usize, manifold: Manifold, activation: Activation, rng: &mut ChaCha8Rng) -> Self {
        let d_out = manifold.dim();
        let s = 1.0 / (d_in as f64).sqrt();
        let weight = Array2::from_shape_simple_fn((d_in, d_out), || rng.random_range(-s..=s));
        Self {
            weight: Tensor::new(weight),
            bias: Tensor::new(Array2::zeros((1, d_out))),
            manifold,
            activation,
        }
    }

    pub fn d_in(&self) -> usize {
        self.weight.shape().0
    }

    pub fn input_manifold(&self) -> Manifold {
        self.manifold
            .with_dim(self.d_in())
            .expect("layer input dimension is at least 1")
    }

    /// Records the layer on `tape` given parameter vars `w`, `b`.
    pub fn forward_var<'t>(
        &self,
        h: Var<'t>,
        adj: &NormalizedAdjacency,
        w: Var<'t>,
        b: Var<'t>,
    ) -> Var<'t> {
        let tangent = geometry::log0(&self.input_manifold(), h);
        let agg = tangent.spmm(adj.matrix());
        let z = self.activation.apply(agg.matmul(w).add(b));
        geometry::exp0(&self.manifold, z)
    }

    /// Forward pass over frozen weights.
    pub fn forward(&self, h: &Array2<f64>, adj: &NormalizedAdjacency) -> Result<Array2<f64>> {
        let tape = Tape::new();
        let out = self.forward_var(
            tape.constant(h.clone()),
            adj,
            tape.constant(self.weight.value.clone()),
            tape.constant(self.bias.value.clone()),
        );
        tape.check()?;
        let value = out.value().to_owned();
        check_points(&self.manifold, &value)?;
        Ok(value)
    }
}

/// Every row must satisfy the manifold's point invariants.
pub fn check_points(m: &Manifold, h: &Array2<f64>) -> Result<()> {
    for row in h.axis_iter(Axis(0)) {
        m.check_coords(row)?;
    }
    Ok(())
}

/// Maps Euclidean features onto `m` through `exp_o`. Rows whose tangent norm
/// exceeds the exp-map limit are rescaled onto it; the count of rescaled
/// rows is returned alongside the points.
pub fn lift_features(m: &Manifold, x: &Array2<f64>) -> Result<(Array2<f64>, usize)> {
    if x.ncols() != m.dim() {
        return Err(Error::DimensionMismatch {
            expected: m.dim(),
            got: x.ncols(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::Config("non-finite feature value".into()));
    }
    let (clamped, count) = clamp_tangent_rows(m, x);
    let tape = Tape::new();
    let out = geometry::exp0(m, tape.constant(clamped)).value().to_owned();
    Ok((out, count))
}

fn clamp_tangent_rows(m: &Manifold, x: &Array2<f64>) -> (Array2<f64>, usize) {
    // limit is on √c‖v‖; keep a hair inside so exp0's own clamp stays inactive
    let max = geometry::tangent_limit(m) / m.c().sqrt() * (1.0 - 1e-12);
    let mut out = x.clone();
    let mut count = 0;
    for mut row in out.rows_mut() {
        let n = row.dot(&row).sqrt();
        if n > max {
            row *= max / n;
            count += 1;
        }
    }
    (out, count)
}

/// A stack of layers sharing one model kind and curvature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Encoder {
    pub layers: Vec<HgnnLayer>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub layers: usize,
    /// Activation between layers; the output layer has none.
    pub activation: Activation,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            embed_dim: 16,
            layers: 2,
            activation: Activation::Tanh,
        }
    }
}

impl Encoder {
    /// `base` supplies model kind and curvature; its dimension is ignored.
    pub fn init(d_in: usize, base: Manifold, cfg: &EncoderConfig, rng: &mut ChaCha8Rng) -> Result<Self> {
        if cfg.layers == 0 || cfg.hidden_dim == 0 || cfg.embed_dim == 0 || d_in == 0 {
            return Err(Error::Config("encoder dimensions and depth must be >= 1".into()));
        }
        let mut layers = Vec::with_capacity(cfg.layers);
        let mut d = d_in;
        for l in 0..cfg.layers {
            let last = l + 1 == cfg.layers;
            let d_out = if last { cfg.embed_dim } else { cfg.hidden_dim };
            let act = if last { Activation::None } else { cfg.activation };
            layers.push(HgnnLayer::init(d, base.with_dim(d_out)?, act, rng));
            d = d_out;
        }
        Ok(Self { layers })
    }

    pub fn input_manifold(&self) -> Manifold {
        self.layers[0].input_manifold()
    }

    pub fn output_manifold(&self) -> Manifold {
        self.layers.last().expect("encoder has layers").manifold
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weight, &mut l.bias])
            .collect()
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.layers.iter().flat_map(|l| [&l.weight, &l.bias]).collect()
    }

    /// Records the encoder; `params` are the tape vars of [`Encoder::params`]
    /// in order. `x` holds Euclidean features.
    pub fn forward_var<'t>(
        &self,
        tape: &'t Tape,
        x: &Array2<f64>,
        adj: &NormalizedAdjacency,
        params: &[Var<'t>],
    ) -> Result<Var<'t>> {
        let (lifted, _) = lift_features(&self.input_manifold(), x)?;
        let mut h = tape.constant(lifted);
        for (l, layer) in self.layers.iter().enumerate() {
            h = layer.forward_var(h, adj, params[2 * l], params[2 * l + 1]);
            if cfg!(debug_assertions) {
                tape.check()?;
                check_points(&layer.manifold, &h.value())?;
            }
        }
        Ok(h)
    }

    pub fn forward(&self, x: &Array2<f64>, adj: &NormalizedAdjacency) -> Result<Array2<f64>> {
        let tape = Tape::new();
        let params: Vec<_> = self.params().into_iter().map(|p| tape.constant(p.value.clone())).collect();
        let out = self.forward_var(&tape, x, adj, &params)?;
        tape.check()?;
        let value = out.value().to_owned();
        check_points(&self.output_manifold(), &value)?;
        Ok(value)
    }
}

/// Node embeddings of the two views, one row per node.
#[derive(Clone, Debug, PartialEq)]
pub struct DualEmbedding {
    pub alpha: Array2<f64>,
    pub beta: Array2<f64>,
    pub manifold_alpha: Manifold,
    pub manifold_beta: Manifold,
}

impl DualEmbedding {
    pub fn n_nodes(&self) -> usize {
        self.alpha.nrows()
    }

    pub fn point_alpha(&self, i: usize) -> crate::manifold::Point {
        self.manifold_alpha.point_unchecked(self.alpha.row(i).to_owned())
    }

    pub fn point_beta(&self, i: usize) -> crate::manifold::Point {
        self.manifold_beta.point_unchecked(self.beta.row(i).to_owned())
    }
}

pub fn encode_views(
    x: &Array2<f64>,
    adj: &NormalizedAdjacency,
    alpha: &Encoder,
    beta: &Encoder,
) -> Result<DualEmbedding> {
    Ok(DualEmbedding {
        alpha: alpha.forward(x, adj)?,
        beta: beta.forward(x, adj)?,
        manifold_alpha: alpha.output_manifold(),
        manifold_beta: beta.output_manifold(),
    })
}
