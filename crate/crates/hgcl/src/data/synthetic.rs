use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{split, Graph, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};

/// Complete `branching`-ary tree with `depth` levels below the root, nodes
/// numbered in breadth-first order (children of `i` are `b·i + 1 ..= b·i + b`).
///
/// Labels are the index of the depth-1 subtree containing a node (the root
/// is class 0). Features are the class one-hot in the first `branching`
/// columns plus `N(0, noise²)` on every column; `d_feat` is raised to
/// `branching` if smaller. Masks use [`DEFAULT_FRACTIONS`] with `seed`.
pub fn synthetic_tree(branching: usize, depth: usize, d_feat: usize, noise: f64, seed: u64) -> Result<Graph> {
    if branching < 2 || depth < 2 {
        return Err(Error::Config(format!(
            "synthetic tree needs branching >= 2 and depth >= 2, got ({branching}, {depth})"
        )));
    }
    if !(noise >= 0.0) {
        return Err(Error::Config(format!("noise must be non-negative, got {noise}")));
    }
    let mut n = 0usize;
    let mut level = 1usize;
    for _ in 0..=depth {
        n += level;
        level *= branching;
    }
    let d = d_feat.max(branching);
    let mut edges = Vec::with_capacity(n - 1);
    let mut labels = vec![0usize; n];
    for child in 1..n {
        let parent = (child - 1) / branching;
        edges.push((parent, child));
        labels[child] = if parent == 0 { child - 1 } else { labels[parent] };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, noise).expect("valid noise");
    let mut features = Array2::zeros((n, d));
    for i in 0..n {
        features[[i, labels[i]]] = 1.0;
        if noise > 0.0 {
            for j in 0..d {
                features[[i, j]] += normal.sample(&mut rng);
            }
        }
    }
    let mut g = Graph::new(n, edges, features, labels)?;
    g.set_masks(split(&g.labels, DEFAULT_FRACTIONS, seed)?);
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_depth_three() {
        let g = synthetic_tree(2, 3, 4, 0.1, 0).unwrap();
        assert_eq!(g.n_nodes, 15);
        assert_eq!(g.n_edges(), 14);
        assert_eq!(g.n_classes(), 2);
        assert_eq!(g.labels[0], 0);
        assert_eq!(g.labels[1], 0);
        assert_eq!(g.labels[2], 1);
        assert_eq!(g.labels[14], 1);
        g.validate().unwrap();
    }

    #[test]
    fn noiseless_features_are_one_hot() {
        let g = synthetic_tree(3, 2, 5, 0.0, 1).unwrap();
        for i in 0..g.n_nodes {
            let row = g.features.row(i);
            // argmax is the label, so a linear readout separates the classes
            assert_eq!(row[g.labels[i]], 1.0);
            assert_eq!(row.sum(), 1.0);
        }
    }

    #[test]
    fn connected_and_acyclic() {
        let g = synthetic_tree(3, 4, 3, 1.0, 2).unwrap();
        assert_eq!(g.n_edges(), g.n_nodes - 1);
        let dist = crate::data::bfs_distances(&g.neighbors(), 0);
        assert!(dist.iter().all(|&d| d != u32::MAX));
    }

    #[test]
    fn reproducible() {
        assert_eq!(synthetic_tree(2, 4, 3, 0.5, 9).unwrap(), synthetic_tree(2, 4, 3, 0.5, 9).unwrap());
        assert!(synthetic_tree(1, 4, 3, 0.5, 9).is_err());
    }
}
