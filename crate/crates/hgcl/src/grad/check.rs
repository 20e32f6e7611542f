//! Central finite-difference gradient checking.

use ndarray::Array2;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Tape, Var};
use crate::error::{Error, Result};

/// Parameter blocks larger than this are checked on a random subset of
/// this many coordinates.
pub const DEFAULT_MAX_COORDS: usize = 200;

/// Denominator floor of the relative error, so coordinates whose true
/// gradient is ~0 are judged on absolute error.
const REL_FLOOR: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub coords_checked: usize,
}

fn eval<F>(f: &F, params: &[Array2<f64>]) -> Result<f64>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    let tape = Tape::new();
    let vars: Vec<_> = params.iter().map(|p| tape.constant(p.clone())).collect();
    let out = f(&tape, &vars);
    tape.check()?;
    let v = out.item();
    if !v.is_finite() {
        return Err(Error::NonFinite {
            op: "grad_check objective",
            node: 0,
        });
    }
    Ok(v)
}

/// Compares the tape gradient of the scalar `f(params)` with central
/// differences `(f(θ+εe) − f(θ−εe)) / 2ε` and returns the largest relative
/// error `|a − n| / max(|a|, |n|, 1e-6)`.
pub fn grad_check<F>(f: F, params: &[Array2<f64>], eps: f64, seed: u64) -> Result<GradCheck>
where
    F: for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>,
{
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Config(format!("grad_check eps {eps} outside [1e-7, 1e-3]")));
    }
    let analytic = {
        let tape = Tape::new();
        let vars: Vec<_> = params.iter().map(|p| tape.var(p.clone())).collect();
        let out = f(&tape, &vars);
        if !out.item().is_finite() {
            tape.check()?;
            return Err(Error::NonFinite {
                op: "grad_check objective",
                node: 0,
            });
        }
        let grads = tape.backward(out)?;
        vars.iter().map(|&v| grads.wrt(v)).collect::<Vec<_>>()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut work: Vec<Array2<f64>> = params.to_vec();
    let mut max_rel = 0.0_f64;
    let mut checked = 0;
    for (b, block) in params.iter().enumerate() {
        let n = block.len();
        let coords: Vec<usize> = if n > DEFAULT_MAX_COORDS {
            let mut v = sample(&mut rng, n, DEFAULT_MAX_COORDS).into_vec();
            v.sort_unstable();
            v
        } else {
            (0..n).collect()
        };
        let cols = block.ncols();
        for flat in coords {
            let ix = [flat / cols, flat % cols];
            let orig = block[ix];
            work[b][ix] = orig + eps;
            let up = eval(&f, &work)?;
            work[b][ix] = orig - eps;
            let down = eval(&f, &work)?;
            work[b][ix] = orig;
            let numeric = (up - down) / (2.0 * eps);
            let a = analytic[b][ix];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(REL_FLOOR);
            max_rel = max_rel.max(rel);
            checked += 1;
        }
    }
    Ok(GradCheck {
        max_rel_err: max_rel,
        coords_checked: checked,
    })
}
