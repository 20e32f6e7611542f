use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_FRACTIONS: (f64, f64, f64) = (0.6, 0.2, 0.2);

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Masks {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

/// Class-stratified train/val/test masks. Each class contributes
/// `round(f · count)` nodes to every split; every class must receive at least
/// one training node.
pub fn split(labels: &[usize], fractions: (f64, f64, f64), seed: u64) -> Result<Masks> {
    let (ft, fv, fs) = fractions;
    if [ft, fv, fs].iter().any(|f| !(0.0..=1.0).contains(f)) || ft + fv + fs > 1.0 + 1e-9 {
        return Err(Error::Config(format!(
            "split fractions {fractions:?} must be in [0, 1] and sum to at most 1"
        )));
    }
    let n = labels.len();
    let n_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = Masks {
        train: vec![false; n],
        val: vec![false; n],
        test: vec![false; n],
    };
    for (class, mut ids) in by_class.into_iter().enumerate() {
        if ids.is_empty() {
            continue;
        }
        ids.shuffle(&mut rng);
        let count = ids.len() as f64;
        let n_train = (ft * count).round() as usize;
        if n_train == 0 || n_train > ids.len() {
            return Err(Error::Graph(format!(
                "class {class} has {} nodes, not enough for split {fractions:?}",
                ids.len()
            )));
        }
        // rounding may overshoot by a node; later splits absorb it
        let n_val = ((fv * count).round() as usize).min(ids.len() - n_train);
        let n_test = ((fs * count).round() as usize).min(ids.len() - n_train - n_val);
        let (tr, rest) = ids.split_at(n_train);
        let (va, rest) = rest.split_at(n_val);
        for &i in tr {
            masks.train[i] = true;
        }
        for &i in va {
            masks.val[i] = true;
        }
        for &i in &rest[..n_test] {
            masks.test[i] = true;
        }
    }
    Ok(masks)
}
