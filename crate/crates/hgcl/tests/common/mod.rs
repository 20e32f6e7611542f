//! Reference implementations used as test oracles. Written directly from the
//! closed-form definitions and kept independent of the library code paths.

#![allow(dead_code)]

use std::collections::VecDeque;

use ndarray::{Array1, Array2, ArrayView1};

pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Discriminator σ((b − d)/τ) with the [1e-7, 1 − 1e-7] clamp.
pub fn disc(d: f64, b: f64, tau: f64) -> f64 {
    sigmoid((b - d) / tau).clamp(1e-7, 1.0 - 1e-7)
}

fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Poincaré distance `(1/√c) acosh(1 + 2c‖x−y‖² / ((1−c‖x‖²)(1−c‖y‖²)))`.
pub fn poincare_dist(c: f64, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let diff: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
    let nx = dot(x, x);
    let ny = dot(y, y);
    let arg = 1.0 + 2.0 * c * diff / ((1.0 - c * nx) * (1.0 - c * ny));
    arg.max(1.0).acosh() / c.sqrt()
}

pub fn minkowski(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    -x[0] * y[0] + x.iter().zip(y).skip(1).map(|(a, b)| a * b).sum::<f64>()
}

/// Lorentz distance `(1/√c) acosh(−c⟨x,y⟩_L)`.
pub fn lorentz_dist(c: f64, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    (-c * minkowski(x, y)).max(1.0).acosh() / c.sqrt()
}

/// Distance for either model, chosen by `lorentz`.
pub fn dist(lorentz: bool, c: f64, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    if lorentz {
        lorentz_dist(c, x, y)
    } else {
        poincare_dist(c, x, y)
    }
}

/// Polar coordinates about the origin: hyperbolic radius and unit direction.
pub fn polar(lorentz: bool, c: f64, x: ArrayView1<f64>) -> (f64, Array1<f64>) {
    let sc = c.sqrt();
    let (r, s) = if lorentz {
        ((sc * x[0]).max(1.0).acosh() / sc, x.slice(ndarray::s![1..]).to_owned())
    } else {
        let n = dot(x, x).sqrt();
        (2.0 / sc * (sc * n).atanh(), x.to_owned())
    };
    let n = dot(s.view(), s.view()).sqrt();
    let dir = if n > 0.0 { s / n } else { Array1::zeros(x.len() - usize::from(lorentz)) };
    (r, dir)
}

/// The point at hyperbolic radius `r` in direction `dir`.
pub fn from_polar(lorentz: bool, c: f64, r: f64, dir: ArrayView1<f64>) -> Array1<f64> {
    let sc = c.sqrt();
    if lorentz {
        let mut out = Array1::zeros(dir.len() + 1);
        out[0] = (sc * r).cosh() / sc;
        for (o, d) in out.iter_mut().skip(1).zip(dir) {
            *o = (sc * r).sinh() / sc * d;
        }
        out
    } else {
        dir.to_owned() * ((sc * r / 2.0).tanh() / sc)
    }
}

/// Moves a point between models/curvatures keeping its radius and direction.
pub fn transfer(from_lorentz: bool, c_from: f64, to_lorentz: bool, c_to: f64, x: ArrayView1<f64>) -> Array1<f64> {
    let (r, d) = polar(from_lorentz, c_from, x);
    from_polar(to_lorentz, c_to, r, d.view())
}

/// Central-difference gradient of `f` at `x` (every coordinate).
pub fn finite_diff(f: &dyn Fn(&[Array2<f64>]) -> f64, x: &[Array2<f64>], eps: f64) -> Vec<Array2<f64>> {
    let mut work = x.to_vec();
    let mut out = Vec::new();
    for b in 0..x.len() {
        let mut g = Array2::zeros(x[b].dim());
        for idx in ndarray::indices(x[b].dim()) {
            let orig = x[b][idx];
            work[b][idx] = orig + eps;
            let up = f(&work);
            work[b][idx] = orig - eps;
            let down = f(&work);
            work[b][idx] = orig;
            g[idx] = (up - down) / (2.0 * eps);
        }
        out.push(g);
    }
    out
}

/// Largest `|a − n| / max(|a|, |n|, floor)` over all entries.
pub fn max_rel_err(a: &[Array2<f64>], n: &[Array2<f64>], floor: f64) -> f64 {
    a.iter()
        .zip(n)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs() / p.abs().max(q.abs()).max(floor)))
        .fold(0.0, f64::max)
}

pub fn bfs(adj: &[Vec<usize>], s: usize) -> Vec<Option<u32>> {
    let mut d = vec![None; adj.len()];
    d[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(u) = q.pop_front() {
        for &v in &adj[u] {
            if d[v].is_none() {
                d[v] = Some(d[u].unwrap() + 1);
                q.push_back(v);
            }
        }
    }
    d
}

pub fn adjacency(n: usize, edges: &[(usize, usize)]) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for &(u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    adj
}

/// Four-point δ by exhaustive enumeration of all 4-subsets of a connected
/// graph: max over quadruples of (largest − second largest pair sum) / 2.
pub fn brute_force_delta(n: usize, edges: &[(usize, usize)]) -> f64 {
    let adj = adjacency(n, edges);
    let d: Vec<Vec<f64>> = (0..n)
        .map(|s| bfs(&adj, s).into_iter().map(|x| x.expect("connected") as f64).collect())
        .collect();
    let mut best = 0.0_f64;
    for w in 0..n {
        for x in w + 1..n {
            for y in x + 1..n {
                for z in y + 1..n {
                    let mut s = [d[w][x] + d[y][z], d[w][y] + d[x][z], d[w][z] + d[x][y]];
                    s.sort_by(|a, b| b.partial_cmp(a).unwrap());
                    best = best.max((s[0] - s[1]) / 2.0);
                }
            }
        }
    }
    best
}
