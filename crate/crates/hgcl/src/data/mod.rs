//! Graphs, file formats, splits, adjacency normalization, synthetic trees and
//! Gromov δ-hyperbolicity.

mod adjacency;
mod delta;
mod graph;
mod io;
mod split;
mod synthetic;

pub use adjacency::{normalize_adjacency, NormalizedAdjacency};
pub use delta::{bfs_distances, gromov_delta, DeltaMode, DeltaReport, EXACT_MAX_NODES};
pub use graph::Graph;
pub use io::{load_graph, save_graph, Splits};
pub use split::{split, Masks, DEFAULT_FRACTIONS};
pub use synthetic::synthetic_tree;
