use ndarray::Array2;

use crate::error::{Error, Result};

/// An undirected, node-labelled graph with features and split masks.
#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    pub n_nodes: usize,
    /// Undirected edges `(u, v)` with `u < v`, sorted and unique.
    pub edges: Vec<(usize, usize)>,
    pub features: Array2<f64>,
    pub labels: Vec<usize>,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

impl Graph {
    /// Builds a graph, dropping self-loops and duplicate edges. Masks start
    /// empty (all `false`).
    pub fn new(
        n_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Array2<f64>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let mut e: Vec<(usize, usize)> = Vec::new();
        for (u, v) in edges {
            if u >= n_nodes || v >= n_nodes {
                return Err(Error::Graph(format!(
                    "edge ({u}, {v}) out of range for {n_nodes} nodes"
                )));
            }
            if u != v {
                e.push((u.min(v), u.max(v)));
            }
        }
        e.sort_unstable();
        e.dedup();
        if features.nrows() != n_nodes {
            return Err(Error::Graph(format!(
                "{} feature rows for {n_nodes} nodes",
                features.nrows()
            )));
        }
        if labels.len() != n_nodes {
            return Err(Error::Graph(format!(
                "{} labels for {n_nodes} nodes",
                labels.len()
            )));
        }
        Ok(Self {
            n_nodes,
            edges: e,
            features,
            labels,
            train_mask: vec![false; n_nodes],
            val_mask: vec![false; n_nodes],
            test_mask: vec![false; n_nodes],
        })
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Sorted adjacency lists.
    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_nodes];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        for a in &mut adj {
            a.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n_nodes];
        for &(u, v) in &self.edges {
            d[u] += 1;
            d[v] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    pub fn set_masks(&mut self, masks: crate::data::Masks) {
        self.train_mask = masks.train;
        self.val_mask = masks.val;
        self.test_mask = masks.test;
    }

    /// Node ids selected by a mask.
    pub fn mask_ids(mask: &[bool]) -> Vec<usize> {
        mask.iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }

    /// Checks masks are disjoint, sized correctly, and that the training
    /// mask covers every class.
    pub fn validate(&self) -> Result<()> {
        for mask in [&self.train_mask, &self.val_mask, &self.test_mask] {
            if mask.len() != self.n_nodes {
                return Err(Error::Graph("mask length differs from node count".into()));
            }
        }
        for i in 0..self.n_nodes {
            let hits = [self.train_mask[i], self.val_mask[i], self.test_mask[i]]
                .iter()
                .filter(|&&b| b)
                .count();
            if hits > 1 {
                return Err(Error::Graph(format!("node {i} is in more than one split")));
            }
        }
        let mut seen = vec![false; self.n_classes()];
        for i in 0..self.n_nodes {
            if self.train_mask[i] {
                seen[self.labels[i]] = true;
            }
        }
        if let Some(c) = seen.iter().position(|s| !s) {
            return Err(Error::Graph(format!("class {c} has no training node")));
        }
        if self.features.iter().any(|v| !v.is_finite()) {
            return Err(Error::Graph("non-finite feature value".into()));
        }
        Ok(())
    }
}
