//! Row-batched, differentiable counterparts of the manifold operations used
//! during training. Each row of a [`Var`] is one point (ambient coordinates)
//! or one tangent vector at the origin (intrinsic coordinates).

use ndarray::Array2;

use crate::grad::Var;
use crate::manifold::{Manifold, ModelKind, BALL_MARGIN};

/// Norms below this are treated as zero in the `f(r)/r` ratios.
const TINY: f64 = 1e-15;

/// Largest `√c·‖v‖` accepted by [`exp0`]. Both models stop at the same
/// hyperbolic radius `2·artanh(1 - BALL_MARGIN) / √c`.
pub fn tangent_limit(m: &Manifold) -> f64 {
    let ball = (1.0 - BALL_MARGIN).atanh();
    match m.kind() {
        ModelKind::PoincareBall => ball,
        ModelKind::Lorentz => 2.0 * ball,
    }
}

/// `exp_o` applied row-wise to intrinsic tangent coordinates `v` (`n × dim`).
/// Returns ambient coordinates (`n × dim` or `n × (dim + 1)`).
pub fn exp0<'t>(m: &Manifold, v: Var<'t>) -> Var<'t> {
    let sc = m.c().sqrt();
    let r = v.row_norm().clamp_min(TINY);
    let t = r.scale(sc);
    let limit = tangent_limit(m);
    let tc = t.clamp(0.0, limit);
    match m.kind() {
        ModelKind::PoincareBall => {
            // tanh(√c r) v / (√c r)
            let coef = tc.tanh().div(t);
            v.mul(coef)
        }
        ModelKind::Lorentz => {
            // (cosh(√c r)/√c, sinh(√c r) v / (√c r))
            let time = tc.cosh().scale(1.0 / sc);
            let space = v.mul(tc.sinh().div(t));
            time.concat_cols(space)
        }
    }
}

/// `log_o` applied row-wise; returns intrinsic coordinates (`n × dim`).
pub fn log0<'t>(m: &Manifold, x: Var<'t>) -> Var<'t> {
    let sc = m.c().sqrt();
    match m.kind() {
        ModelKind::PoincareBall => {
            let t = x.row_norm().clamp_min(TINY).scale(sc);
            x.mul(t.atanh_clamped().div(t))
        }
        ModelKind::Lorentz => {
            // spatial part only; the time coordinate of log_o is zero
            let cols = x.shape().1;
            let s = x.slice_cols(1, cols);
            let t = s.row_norm().clamp_min(TINY).scale(sc);
            s.mul(t.asinh().div(t))
        }
    }
}

/// Row-paired geodesic distances, `n × 1`.
pub fn distance<'t>(m: &Manifold, x: Var<'t>, y: Var<'t>) -> Var<'t> {
    let c = m.c();
    let sc = c.sqrt();
    let diff = x.sub(y);
    match m.kind() {
        ModelKind::PoincareBall => {
            // (2/√c) artanh(√c ‖x-y‖ / √(1 - 2c⟨x,y⟩ + c²‖x‖²‖y‖²))
            let xy = x.mul(y).row_sum();
            let x2 = x.square().row_sum();
            let y2 = y.square().row_sum();
            let den = x2
                .mul(y2)
                .scale(c * c)
                .sub(xy.scale(2.0 * c))
                .add_scalar(1.0)
                .sqrt();
            diff.row_norm()
                .div(den)
                .scale(sc)
                .atanh_clamped()
                .scale(2.0 / sc)
        }
        ModelKind::Lorentz => {
            // (2/√c) asinh(√c/2 · √⟨x-y, x-y⟩_L)
            let cols = x.shape().1;
            let mut sign = Array2::ones((1, cols));
            sign[[0, 0]] = -1.0;
            let sign = x.tape().constant(sign);
            diff.square()
                .mul(sign)
                .row_sum()
                .clamp_min(0.0)
                .sqrt()
                .scale(sc / 2.0)
                .asinh()
                .scale(2.0 / sc)
        }
    }
}

/// Moves points from `source` to `target` through the origin tangent spaces,
/// preserving the distance to the origin.
pub fn transfer<'t>(source: &Manifold, target: &Manifold, x: Var<'t>) -> Var<'t> {
    if source == target {
        return x;
    }
    let ratio = source.origin_metric_scale() / target.origin_metric_scale();
    exp0(target, log0(source, x).scale(ratio))
}

/// Row-paired inner products of origin-tangent coordinates, `n × 1`.
pub fn tangent_inner<'t>(m: &Manifold, x: Var<'t>, y: Var<'t>) -> Var<'t> {
    log0(m, x).mul(log0(m, y)).row_sum()
}
