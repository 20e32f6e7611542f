//! Decoder, objective, training loop, metrics and heatmap export.

mod config;
mod heatmap;
mod metrics;
mod model;
mod train;

pub use config::{Ablation, TrainConfig, ValMetric, ViewConfig};
pub use heatmap::{class_distance_means, default_heatmap_nodes, export_heatmap, heatmap_matrix, View};
pub use metrics::{classification_metrics, evaluate, Metrics};
pub use model::{cross_entropy, cross_entropy_var, decode, decode_var, total_loss, Model};
pub use train::{train, EpochRecord, TrainOutcome};
