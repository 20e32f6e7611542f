use std::rc::Rc;

use super::Graph;
use crate::grad::CsrMatrix;

/// `D^{-1/2} (A + I) D^{-1/2}` with `D` the degree matrix of `A + I`.
#[derive(Clone, Debug)]
pub struct NormalizedAdjacency(pub Rc<CsrMatrix>);

impl NormalizedAdjacency {
    pub fn matrix(&self) -> &Rc<CsrMatrix> {
        &self.0
    }
}

pub fn normalize_adjacency(graph: &Graph) -> NormalizedAdjacency {
    let deg: Vec<f64> = graph.degrees().iter().map(|&d| d as f64 + 1.0).collect();
    let mut trip = Vec::with_capacity(2 * graph.n_edges() + graph.n_nodes);
    for i in 0..graph.n_nodes {
        trip.push((i, i, 1.0 / deg[i]));
    }
    for &(u, v) in &graph.edges {
        let w = 1.0 / (deg[u] * deg[v]).sqrt();
        trip.push((u, v, w));
        trip.push((v, u, w));
    }
    NormalizedAdjacency(Rc::new(CsrMatrix::from_triplets(
        graph.n_nodes,
        graph.n_nodes,
        trip,
    )))
}
