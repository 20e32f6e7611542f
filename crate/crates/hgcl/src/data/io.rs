//! Plain-text graph directory format:
//!
//! - `edges.txt`: two whitespace-separated node ids per line (undirected);
//! - `features.csv`: `id,f₁,…,f_d` per line;
//! - `labels.csv`: `id,label` per line;
//! - `splits.json` (optional): `{"train": [...], "val": [...], "test": [...]}`.
//!
//! Blank lines and lines starting with `#` are ignored. Node ids must cover
//! `0..n` exactly, where `n` is the number of feature rows.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::{split, Graph, DEFAULT_FRACTIONS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Splits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_id(path: &Path, line: usize, tok: &str) -> Result<usize> {
    tok.trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid node id `{tok}`")))
}

/// Loads a graph directory. Without `splits.json` the masks come from
/// [`split`] with the default fractions and seed 0.
pub fn load_graph(dir: &Path) -> Result<Graph> {
    let feat_path = dir.join("features.csv");
    let text = fs::read_to_string(&feat_path)?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (ln, line) in content_lines(&text) {
        let mut parts = line.split(',');
        let id = parse_id(&feat_path, ln, parts.next().unwrap_or(""))?;
        let vals = parts
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(&feat_path, ln, format!("invalid feature `{t}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some((_, first)) = rows.first() {
            if first.len() != vals.len() {
                return Err(parse_err(
                    &feat_path,
                    ln,
                    format!("expected {} features, found {}", first.len(), vals.len()),
                ));
            }
        }
        rows.push((id, vals));
    }
    let n = rows.len();
    if n == 0 {
        return Err(parse_err(&feat_path, 0, "no feature rows"));
    }
    let d = rows[0].1.len();
    let mut features = Array2::zeros((n, d));
    let mut seen = vec![false; n];
    for (id, vals) in rows {
        if id >= n || seen[id] {
            return Err(Error::Graph(format!(
                "feature ids must be exactly 0..{n}; found id {id} (gap or duplicate)"
            )));
        }
        seen[id] = true;
        for (j, v) in vals.into_iter().enumerate() {
            features[[id, j]] = v;
        }
    }

    let label_path = dir.join("labels.csv");
    let text = fs::read_to_string(&label_path)?;
    let mut labels = vec![None; n];
    for (ln, line) in content_lines(&text) {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| parse_err(&label_path, ln, "expected `id,label`"))?;
        let id = parse_id(&label_path, ln, a)?;
        let label: usize = b
            .trim()
            .parse()
            .map_err(|_| parse_err(&label_path, ln, format!("invalid label `{}`", b.trim())))?;
        if id >= n {
            return Err(parse_err(&label_path, ln, format!("node id {id} out of range")));
        }
        labels[id] = Some(label);
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::Graph(format!("node {i} has no label"))))
        .collect::<Result<Vec<_>>>()?;

    let edge_path = dir.join("edges.txt");
    let text = fs::read_to_string(&edge_path)?;
    let mut edges = Vec::new();
    for (ln, line) in content_lines(&text) {
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 2 {
            return Err(parse_err(&edge_path, ln, "expected two node ids"));
        }
        let u = parse_id(&edge_path, ln, toks[0])?;
        let v = parse_id(&edge_path, ln, toks[1])?;
        if u >= n || v >= n {
            return Err(parse_err(&edge_path, ln, format!("edge ({u}, {v}) out of range")));
        }
        edges.push((u, v));
    }

    let mut graph = Graph::new(n, edges, features, labels)?;
    let split_path = dir.join("splits.json");
    if split_path.exists() {
        let splits: Splits = serde_json::from_str(&fs::read_to_string(&split_path)?)?;
        let mut masks = super::Masks {
            train: vec![false; n],
            val: vec![false; n],
            test: vec![false; n],
        };
        for (ids, mask) in [
            (&splits.train, &mut masks.train),
            (&splits.val, &mut masks.val),
            (&splits.test, &mut masks.test),
        ] {
            for &i in ids {
                if i >= n {
                    return Err(Error::UnknownNode(i));
                }
                mask[i] = true;
            }
        }
        graph.set_masks(masks);
    } else {
        graph.set_masks(split(&graph.labels, DEFAULT_FRACTIONS, 0)?);
    }
    graph.validate()?;
    Ok(graph)
}

/// Writes `graph` in the format read by [`load_graph`], including
/// `splits.json`. Floats use the shortest representation that round-trips.
pub fn save_graph(graph: &Graph, dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut edges = String::new();
    for &(u, v) in &graph.edges {
        writeln!(edges, "{u} {v}").unwrap();
    }
    let mut feats = String::new();
    for (i, row) in graph.features.rows().into_iter().enumerate() {
        write!(feats, "{i}").unwrap();
        for v in row {
            write!(feats, ",{v:?}").unwrap();
        }
        feats.push('\n');
    }
    let mut labels = String::new();
    for (i, l) in graph.labels.iter().enumerate() {
        writeln!(labels, "{i},{l}").unwrap();
    }
    let splits = Splits {
        train: Graph::mask_ids(&graph.train_mask),
        val: Graph::mask_ids(&graph.val_mask),
        test: Graph::mask_ids(&graph.test_mask),
    };
    let out = vec![
        dir.join("edges.txt"),
        dir.join("features.csv"),
        dir.join("labels.csv"),
        dir.join("splits.json"),
    ];
    fs::write(&out[0], edges)?;
    fs::write(&out[1], feats)?;
    fs::write(&out[2], labels)?;
    fs::write(&out[3], serde_json::to_string(&splits)?)?;
    Ok(out)
}
