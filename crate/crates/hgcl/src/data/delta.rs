//! Gromov δ-hyperbolicity via the four-point condition.
//!
//! For a quadruple `(w, x, y, z)` let `S₁ ≥ S₂ ≥ S₃` be the three sums
//! `d(w,x)+d(y,z)`, `d(w,y)+d(x,z)`, `d(w,z)+d(x,y)` of shortest-path
//! distances; the quadruple's δ is `(S₁ − S₂)/2` and the graph's δ is the
//! maximum over quadruples.

use std::collections::{HashMap, VecDeque};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::Graph;
use crate::error::{Error, Result};

/// Exact enumeration is refused above this many nodes.
pub const EXACT_MAX_NODES: usize = 60;

/// BFS rows cached at once in sampled mode.
const MAX_CACHED_ROWS: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DeltaMode {
    Exact,
    Sampled { quadruples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DeltaReport {
    pub delta: f64,
    /// Nodes of the component the estimate was computed on.
    pub nodes_used: usize,
    pub quadruples: u64,
    pub warning: Option<String>,
}

/// Hop distances from `source`; unreachable nodes get `u32::MAX`.
pub fn bfs_distances(adj: &[Vec<usize>], source: usize) -> Vec<u32> {
    let mut dist = vec![u32::MAX; adj.len()];
    let mut queue = VecDeque::new();
    dist[source] = 0;
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if dist[v] == u32::MAX {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
        }
    }
    dist
}

fn largest_component(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut best: Vec<usize> = Vec::new();
    let mut count = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let d = bfs_distances(adj, s);
        let members: Vec<usize> = (0..n).filter(|&i| d[i] != u32::MAX).collect();
        for &m in &members {
            comp[m] = count;
        }
        count += 1;
        if members.len() > best.len() {
            best = members;
        }
    }
    (best, count)
}

fn four_point(d: impl Fn(usize, usize) -> u32, w: usize, x: usize, y: usize, z: usize) -> u32 {
    let mut s = [d(w, x) + d(y, z), d(w, y) + d(x, z), d(w, z) + d(x, y)];
    s.sort_unstable();
    // (S₁ − S₂) in half-units
    s[2] - s[1]
}

pub fn gromov_delta(graph: &Graph, mode: DeltaMode) -> Result<DeltaReport> {
    if graph.n_nodes < 4 {
        return Err(Error::Graph(format!(
            "δ needs at least 4 nodes, graph has {}",
            graph.n_nodes
        )));
    }
    let full_adj = graph.neighbors();
    let (members, n_components) = largest_component(&full_adj);
    let mut warning = None;
    let adj: Vec<Vec<usize>> = if n_components > 1 {
        warning = Some(format!(
            "graph has {n_components} components; using the largest ({} nodes)",
            members.len()
        ));
        let mut index = vec![usize::MAX; graph.n_nodes];
        for (new, &old) in members.iter().enumerate() {
            index[old] = new;
        }
        members
            .iter()
            .map(|&u| full_adj[u].iter().map(|&v| index[v]).collect())
            .collect()
    } else {
        full_adj
    };
    let n = adj.len();
    if n < 4 {
        return Err(Error::Graph(format!(
            "largest component has {n} nodes, δ needs at least 4"
        )));
    }

    let (twice, quadruples) = match mode {
        DeltaMode::Exact => {
            if n > EXACT_MAX_NODES {
                return Err(Error::Config(format!(
                    "exact δ enumerates all quadruples and is limited to {EXACT_MAX_NODES} nodes \
                     (graph has {n}); use sampling instead"
                )));
            }
            let dist: Vec<Vec<u32>> = (0..n).into_par_iter().map(|s| bfs_distances(&adj, s)).collect();
            let d = |a: usize, b: usize| dist[a][b];
            let mut best = 0;
            let mut count = 0u64;
            for w in 0..n {
                for x in w + 1..n {
                    for y in x + 1..n {
                        for z in y + 1..n {
                            best = best.max(four_point(d, w, x, y, z));
                            count += 1;
                        }
                    }
                }
            }
            (best, count)
        }
        DeltaMode::Sampled { quadruples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cache: HashMap<usize, Vec<u32>> = HashMap::new();
            let mut best = 0;
            for _ in 0..quadruples {
                let q = sample(&mut rng, n, 4).into_vec();
                if cache.len() + 3 > MAX_CACHED_ROWS {
                    cache.clear();
                }
                for &s in &q[..3] {
                    cache.entry(s).or_insert_with(|| bfs_distances(&adj, s));
                }
                let d = |a: usize, b: usize| {
                    cache
                        .get(&a)
                        .map(|row| row[b])
                        .unwrap_or_else(|| cache[&b][a])
                };
                best = best.max(four_point(d, q[0], q[1], q[2], q[3]));
            }
            (best, quadruples as u64)
        }
    };
    Ok(DeltaReport {
        delta: twice as f64 / 2.0,
        nodes_used: n,
        quadruples,
        warning,
    })
}
