use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::data::{normalize_adjacency, Graph};
use crate::error::{Error, Result};

use super::model::Model;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum View {
    Alpha,
    Beta,
}

impl std::str::FromStr for View {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "alpha" => Ok(View::Alpha),
            "beta" => Ok(View::Beta),
            _ => Err(Error::Config(format!("unknown view '{s}' (alpha, beta)"))),
        }
    }
}

/// The first `per_class` node ids of each of the first `classes` labels,
/// grouped by class.
pub fn default_heatmap_nodes(labels: &[usize], per_class: usize, classes: usize) -> Vec<usize> {
    let mut out = Vec::new();
    for c in 0..classes {
        out.extend(labels.iter().enumerate().filter(|(_, &l)| l == c).map(|(i, _)| i).take(per_class));
    }
    out
}

/// Pairwise geodesic distances among `nodes` in one view.
pub fn heatmap_matrix(model: &Model, graph: &Graph, nodes: &[usize], view: View) -> Result<Array2<f64>> {
    if let Some(&bad) = nodes.iter().find(|&&i| i >= graph.n_nodes) {
        return Err(Error::UnknownNode(bad));
    }
    let emb = model.embed(&graph.features, &normalize_adjacency(graph))?;
    let point = |i: usize| match view {
        View::Alpha => emb.point_alpha(i),
        View::Beta => emb.point_beta(i),
    };
    let k = nodes.len();
    let mut d = Array2::zeros((k, k));
    for a in 0..k {
        for b in a + 1..k {
            let p = point(nodes[a]);
            let q = point(nodes[b]);
            let v = p.manifold.distance(&p, &q)?;
            d[[a, b]] = v;
            d[[b, a]] = v;
        }
    }
    Ok(d)
}

/// Writes the distance matrix as CSV: a header `node,<ids>,label`, then one
/// row per node with its id, distances and label. Returns the matrix.
pub fn export_heatmap(model: &Model, graph: &Graph, nodes: &[usize], view: View, out: &Path) -> Result<Array2<f64>> {
    let d = heatmap_matrix(model, graph, nodes, view)?;
    let mut s = String::from("node");
    for i in nodes {
        write!(s, ",{i}").unwrap();
    }
    s.push_str(",label\n");
    for (r, &i) in nodes.iter().enumerate() {
        write!(s, "{i}").unwrap();
        for v in d.row(r) {
            write!(s, ",{v:?}").unwrap();
        }
        writeln!(s, ",{}", graph.labels[i]).unwrap();
    }
    std::fs::write(out, s)?;
    Ok(d)
}

/// Mean off-diagonal distance within classes and across classes.
pub fn class_distance_means(d: &Array2<f64>, labels: &[usize]) -> (f64, f64) {
    let (mut intra, mut ni, mut inter, mut nx) = (0.0, 0usize, 0.0, 0usize);
    for a in 0..labels.len() {
        for b in 0..labels.len() {
            if a == b {
                continue;
            }
            if labels[a] == labels[b] {
                intra += d[[a, b]];
                ni += 1;
            } else {
                inter += d[[a, b]];
                nx += 1;
            }
        }
    }
    (intra / ni.max(1) as f64, inter / nx.max(1) as f64)
}
