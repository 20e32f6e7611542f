use serde::{Deserialize, Serialize};

use crate::encoder::{Activation, EncoderConfig};
use crate::error::{Error, Result};
use crate::hpc::{HpcConfig, HpcOptions, HpcTerms, Similarity};
use crate::manifold::{Manifold, ModelKind};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ablation {
    #[default]
    Full,
    /// No contrastive term at all.
    NoHpc,
    /// Drops the neighbour (tolerance) terms.
    NoPos,
    /// Scores pairs by tangent inner product instead of distance.
    NoDist,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [Ablation::Full, Ablation::NoHpc, Ablation::NoPos, Ablation::NoDist];

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoHpc => "no_hpc",
            Ablation::NoPos => "no_pos",
            Ablation::NoDist => "no_dist",
        }
    }

    pub fn uses_hpc(self) -> bool {
        self != Ablation::NoHpc
    }

    pub fn hpc_options(self) -> HpcOptions {
        HpcOptions {
            similarity: if self == Ablation::NoDist {
                Similarity::TangentInner
            } else {
                Similarity::Distance
            },
            terms: HpcTerms {
                consistency: true,
                tolerance: self != Ablation::NoPos,
            },
        }
    }
}

impl std::str::FromStr for Ablation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ablation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown ablation '{s}' (full, no_hpc, no_pos, no_dist)")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValMetric {
    #[default]
    Accuracy,
    F1,
}

impl std::str::FromStr for ValMetric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" | "acc" => Ok(ValMetric::Accuracy),
            "f1" | "macro_f1" => Ok(ValMetric::F1),
            _ => Err(Error::Config(format!("unknown validation metric '{s}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViewConfig {
    pub kind: ModelKind,
    pub curvature: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub hidden_dim: usize,
    pub embed_dim: usize,
    pub layers: usize,
    pub activation: Activation,
    pub view_alpha: ViewConfig,
    pub view_beta: ViewConfig,
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Weight of the contrastive loss.
    pub lambda_c: f64,
    pub hpc: HpcConfig,
    pub clip: Option<f64>,
    pub seed: u64,
    pub ablation: Ablation,
    pub val_metric: ValMetric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_dim: 16,
            embed_dim: 16,
            layers: 2,
            activation: Activation::Tanh,
            view_alpha: ViewConfig {
                kind: ModelKind::PoincareBall,
                curvature: -1.0,
            },
            view_beta: ViewConfig {
                kind: ModelKind::Lorentz,
                curvature: -0.5,
            },
            lr: 0.01,
            epochs: 500,
            patience: 100,
            lambda_c: 1.0,
            hpc: HpcConfig::default(),
            clip: Some(5.0),
            seed: 0,
            ablation: Ablation::Full,
            val_metric: ValMetric::Accuracy,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.patience > self.epochs {
            return Err(Error::Config(format!(
                "patience {} exceeds epochs {}",
                self.patience, self.epochs
            )));
        }
        if !(self.lambda_c >= 0.0) {
            return Err(Error::Config(format!("lambda_c must be >= 0, got {}", self.lambda_c)));
        }
        if !(self.lr > 0.0) {
            return Err(Error::Config(format!("lr must be > 0, got {}", self.lr)));
        }
        if let Some(c) = self.clip {
            if !(c > 0.0) {
                return Err(Error::Config(format!("clip must be > 0, got {c}")));
            }
        }
        self.hpc.validate()?;
        self.manifold_alpha()?;
        self.manifold_beta()?;
        Ok(())
    }

    /// Whether the contrastive term is computed at all.
    pub fn contrastive(&self) -> bool {
        self.ablation.uses_hpc() && self.lambda_c > 0.0
    }

    pub fn encoder(&self) -> EncoderConfig {
        EncoderConfig {
            hidden_dim: self.hidden_dim,
            embed_dim: self.embed_dim,
            layers: self.layers,
            activation: self.activation,
        }
    }

    pub fn manifold_alpha(&self) -> Result<Manifold> {
        Manifold::new(self.view_alpha.kind, self.view_alpha.curvature, self.embed_dim)
    }

    pub fn manifold_beta(&self) -> Result<Manifold> {
        Manifold::new(self.view_beta.kind, self.view_beta.curvature, self.embed_dim)
    }
}
