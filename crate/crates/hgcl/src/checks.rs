//! Self-check suites behind the `gradcheck` and `manifold-test` commands.

use std::rc::Rc;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::{normalize_adjacency, Graph};
use crate::encoder::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::geometry;
use crate::grad::{grad_check, CsrMatrix, Tape, Var};
use crate::hpc::{build_sample_plan, hpc_loss_var, HpcConfig, HpcOptions};
use crate::manifold::{self, Manifold, ModelKind, Point, TangentVector};
use crate::pipeline::{Ablation, Model, TrainConfig};

pub const PRIMITIVE_TOL: f64 = 1e-6;
pub const COMPOSITE_TOL: f64 = 1e-4;
pub const HPC_TOL: f64 = 1e-3;
const FD_EPS: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GradScope {
    Primitives,
    Manifold,
    Encoder,
    Hpc,
    All,
}

impl std::str::FromStr for GradScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primitives" => Ok(GradScope::Primitives),
            "manifold" => Ok(GradScope::Manifold),
            "encoder" => Ok(GradScope::Encoder),
            "hpc" => Ok(GradScope::Hpc),
            "all" => Ok(GradScope::All),
            _ => Err(Error::Config(format!(
                "unknown scope '{s}' (primitives, manifold, encoder, hpc, all)"
            ))),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub scope: GradScope,
    pub max_rel_err: f64,
    pub threshold: f64,
    pub coords: usize,
}

impl CheckOutcome {
    pub fn passed(&self) -> bool {
        self.max_rel_err <= self.threshold
    }
}

type Objective = Box<dyn for<'t> Fn(&'t Tape, &[Var<'t>]) -> Var<'t>>;

struct Registered {
    name: String,
    scope: GradScope,
    threshold: f64,
    params: Vec<Array2<f64>>,
    f: Objective,
}

fn uniform(rng: &mut ChaCha8Rng, shape: (usize, usize), lo: f64, hi: f64) -> Array2<f64> {
    Array2::from_shape_simple_fn(shape, || rng.random_range(lo..hi))
}

/// Reduces a matrix output to a scalar with fixed random weights so that
/// every output entry contributes a distinct gradient.
fn project<'t>(out: Var<'t>, seed: u64) -> Var<'t> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = uniform(&mut rng, out.shape(), -1.0, 1.0);
    out.mul(out.tape().constant(w)).sum()
}

fn primitive_checks(rng: &mut ChaCha8Rng) -> Vec<Registered> {
    let mut out = Vec::new();
    let shape = (3, 4);
    let mut unary = |name: &str, lo: f64, hi: f64, op: fn(Var<'_>) -> Var<'_>| {
        let p = uniform(rng, shape, lo, hi);
        out.push(Registered {
            name: format!("primitive/{name}"),
            scope: GradScope::Primitives,
            threshold: PRIMITIVE_TOL,
            params: vec![p],
            f: Box::new(move |_, v| project(op(v[0]), 1)),
        });
    };
    unary("tanh", -2.0, 2.0, |x| x.tanh());
    unary("sigmoid", -3.0, 3.0, |x| x.sigmoid());
    unary("relu", 0.1, 1.0, |x| x.relu());
    unary("ln", 0.5, 3.0, |x| x.ln());
    unary("exp", -1.0, 1.0, |x| x.exp());
    unary("sqrt", 0.5, 3.0, |x| x.sqrt());
    unary("acosh", 1.5, 4.0, |x| x.acosh_clamped());
    unary("atanh", -0.8, 0.8, |x| x.atanh_clamped());
    unary("asinh", -2.0, 2.0, |x| x.asinh());
    unary("cosh", -2.0, 2.0, |x| x.cosh());
    unary("sinh", -2.0, 2.0, |x| x.sinh());
    unary("square", -2.0, 2.0, |x| x.square());
    unary("clamp", -0.4, 0.4, |x| x.clamp(-0.5, 0.5));
    unary("neg", -1.0, 1.0, |x| x.neg());
    unary("scale", -1.0, 1.0, |x| x.scale(-2.5));
    unary("add_scalar", -1.0, 1.0, |x| x.add_scalar(0.7));
    unary("row_norm", 0.2, 1.0, |x| x.row_norm());
    unary("row_sum", -1.0, 1.0, |x| x.row_sum());
    unary("mean", -1.0, 1.0, |x| x.mean());
    unary("log_softmax", -2.0, 2.0, |x| x.log_softmax());
    unary("slice_cols", -1.0, 1.0, |x| x.slice_cols(1, 3));
    unary("gather_rows", -1.0, 1.0, |x| x.gather_rows(vec![2, 0, 2, 1]));

    let mut binary = |name: &str, b_shape: (usize, usize), op: for<'a> fn(Var<'a>, Var<'a>) -> Var<'a>| {
        let a = uniform(rng, shape, -1.0, 1.0);
        let b = uniform(rng, b_shape, 0.5, 1.5);
        out.push(Registered {
            name: format!("primitive/{name}"),
            scope: GradScope::Primitives,
            threshold: PRIMITIVE_TOL,
            params: vec![a, b],
            f: Box::new(move |_, v| project(op(v[0], v[1]), 2)),
        });
    };
    binary("add", (3, 4), |a, b| a.add(b));
    binary("sub_row_broadcast", (1, 4), |a, b| a.sub(b));
    binary("mul_col_broadcast", (3, 1), |a, b| a.mul(b));
    binary("div", (3, 4), |a, b| a.div(b));
    binary("matmul", (4, 2), |a, b| a.matmul(b));
    binary("concat_cols", (3, 2), |a, b| a.concat_cols(b));

    let sp = Rc::new(CsrMatrix::from_triplets(
        3,
        3,
        vec![(0, 0, 0.5), (0, 2, 0.25), (1, 1, 1.0), (2, 0, 0.25), (2, 2, 0.5)],
    ));
    out.push(Registered {
        name: "primitive/spmm".into(),
        scope: GradScope::Primitives,
        threshold: PRIMITIVE_TOL,
        params: vec![uniform(rng, shape, -1.0, 1.0)],
        f: Box::new(move |_, v| project(v[0].spmm(&sp), 3)),
    });
    out
}

fn test_manifolds(dim: usize) -> Vec<Manifold> {
    vec![
        Manifold::poincare(-1.0, dim).unwrap(),
        Manifold::poincare(-2.0, dim).unwrap(),
        Manifold::lorentz(-0.5, dim).unwrap(),
        Manifold::lorentz(-1.0, dim).unwrap(),
    ]
}

fn label(m: &Manifold) -> String {
    format!("{}(K={})", m.kind().name(), m.curvature())
}

fn manifold_checks(rng: &mut ChaCha8Rng) -> Vec<Registered> {
    let mut out = Vec::new();
    let shape = (4, 3);
    for m in test_manifolds(3) {
        let name = label(&m);
        let v = uniform(rng, shape, -0.8, 0.8);
        let w = uniform(rng, shape, -0.8, 0.8);
        let mm = m;
        out.push(Registered {
            name: format!("manifold/exp0/{name}"),
            scope: GradScope::Manifold,
            threshold: COMPOSITE_TOL,
            params: vec![v.clone()],
            f: Box::new(move |_, p| project(geometry::exp0(&mm, p[0]), 4)),
        });
        out.push(Registered {
            name: format!("manifold/log0_exp0/{name}"),
            scope: GradScope::Manifold,
            threshold: COMPOSITE_TOL,
            params: vec![v.clone()],
            f: Box::new(move |_, p| project(geometry::log0(&mm, geometry::exp0(&mm, p[0])), 5)),
        });
        out.push(Registered {
            name: format!("manifold/distance/{name}"),
            scope: GradScope::Manifold,
            threshold: COMPOSITE_TOL,
            params: vec![v.clone(), w.clone()],
            f: Box::new(move |_, p| {
                project(geometry::distance(&mm, geometry::exp0(&mm, p[0]), geometry::exp0(&mm, p[1])), 6)
            }),
        });
        out.push(Registered {
            name: format!("manifold/tangent_inner/{name}"),
            scope: GradScope::Manifold,
            threshold: COMPOSITE_TOL,
            params: vec![v, w],
            f: Box::new(move |_, p| {
                project(
                    geometry::tangent_inner(&mm, geometry::exp0(&mm, p[0]), geometry::exp0(&mm, p[1])),
                    7,
                )
            }),
        });
    }
    let ms = test_manifolds(3);
    for (a, b) in [(ms[0], ms[2]), (ms[3], ms[1])] {
        let v = uniform(rng, shape, -0.8, 0.8);
        out.push(Registered {
            name: format!("manifold/transfer/{}->{}", label(&a), label(&b)),
            scope: GradScope::Manifold,
            threshold: COMPOSITE_TOL,
            params: vec![v],
            f: Box::new(move |_, p| project(geometry::transfer(&a, &b, geometry::exp0(&a, p[0])), 8)),
        });
    }
    out
}

/// A 10-node graph: a 6-cycle with a 4-node tail, two classes.
pub fn ten_node_graph(seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let edges = [(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (3, 6), (6, 7), (7, 8), (8, 9)];
    let x = uniform(&mut rng, (10, 5), -1.0, 1.0);
    let labels = vec![0, 0, 0, 1, 1, 1, 0, 1, 0, 1];
    Graph::new(10, edges, x, labels).expect("fixture graph is valid")
}

fn encoder_checks(rng: &mut ChaCha8Rng) -> Vec<Registered> {
    let g = ten_node_graph(11);
    let cfg = EncoderConfig {
        hidden_dim: 4,
        embed_dim: 3,
        layers: 2,
        ..EncoderConfig::default()
    };
    let mut out = Vec::new();
    for base in [Manifold::poincare(-1.0, 3).unwrap(), Manifold::lorentz(-0.5, 3).unwrap()] {
        let enc = Encoder::init(5, base, &cfg, rng).unwrap();
        let params: Vec<_> = enc.params().into_iter().map(|t| t.value.clone()).collect();
        let x = g.features.clone();
        let graph = g.clone();
        let m = enc.output_manifold();
        out.push(Registered {
            name: format!("encoder/two_layer/{}", label(&base)),
            scope: GradScope::Encoder,
            threshold: COMPOSITE_TOL,
            params,
            f: Box::new(move |tape, p| {
                let adj = normalize_adjacency(&graph);
                let h = enc.forward_var(tape, &x, &adj, p).expect("encoder forward");
                project(geometry::log0(&m, h), 9)
            }),
        });
    }
    let tcfg = TrainConfig {
        hidden_dim: 4,
        embed_dim: 3,
        ..TrainConfig::default()
    };
    let model = Model::init(5, 2, &tcfg, rng).unwrap();
    let emb = model.embed(&g.features, &normalize_adjacency(&g)).unwrap();
    let labels = g.labels.clone();
    out.push(Registered {
        name: "encoder/decoder_cross_entropy".into(),
        scope: GradScope::Encoder,
        threshold: COMPOSITE_TOL,
        params: vec![model.decoder_weight.value.clone(), model.decoder_bias.value.clone()],
        f: Box::new(move |tape, p| {
            let ids: Rc<[usize]> = (0..labels.len()).collect();
            let logits = crate::pipeline::decode_var(
                tape.constant(emb.alpha.clone()),
                tape.constant(emb.beta.clone()),
                &emb.manifold_alpha,
                &emb.manifold_beta,
                p[0],
                p[1],
            );
            crate::pipeline::cross_entropy_var(logits, &labels, &ids)
        }),
    });
    out
}

fn hpc_checks(rng: &mut ChaCha8Rng) -> Vec<Registered> {
    let g = ten_node_graph(12);
    let cfg = HpcConfig {
        m: 2,
        ..HpcConfig::default()
    };
    let plan = Rc::new(build_sample_plan(&g.neighbors(), cfg.m, rng).unwrap());
    let mut out = Vec::new();
    for ablation in [Ablation::Full, Ablation::NoPos, Ablation::NoDist] {
        let tcfg = TrainConfig {
            hidden_dim: 4,
            embed_dim: 3,
            ..TrainConfig::default()
        };
        let model = Model::init(5, 2, &tcfg, rng).unwrap();
        let params: Vec<_> = model.alpha.params().into_iter().chain(model.beta.params()).map(|t| t.value.clone()).collect();
        let graph = g.clone();
        let plan = Rc::clone(&plan);
        let opts: HpcOptions = ablation.hpc_options();
        out.push(Registered {
            name: format!("hpc/through_encoders/{}", ablation.name()),
            scope: GradScope::Hpc,
            threshold: HPC_TOL,
            params,
            f: Box::new(move |tape, p| {
                let adj = normalize_adjacency(&graph);
                let na = model.alpha.params().len();
                let ha = model.alpha.forward_var(tape, &graph.features, &adj, &p[..na]).expect("forward");
                let hb = model.beta.forward_var(tape, &graph.features, &adj, &p[na..]).expect("forward");
                let ma = model.alpha.output_manifold();
                let mb = model.beta.output_manifold();
                hpc_loss_var(tape, ha, hb, &ma, &mb, &plan, &cfg, opts)
            }),
        });
    }
    out
}

fn registry(scope: GradScope, seed: u64) -> Vec<Registered> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut all = Vec::new();
    let want = |s: GradScope| scope == GradScope::All || scope == s;
    // every builder runs so the random stream does not depend on the scope
    let p = primitive_checks(&mut rng);
    let m = manifold_checks(&mut rng);
    let e = encoder_checks(&mut rng);
    let h = hpc_checks(&mut rng);
    for (s, group) in [
        (GradScope::Primitives, p),
        (GradScope::Manifold, m),
        (GradScope::Encoder, e),
        (GradScope::Hpc, h),
    ] {
        if want(s) {
            all.extend(group);
        }
    }
    all
}

/// Number of registered checks in `scope`.
pub fn gradient_check_count(scope: GradScope) -> usize {
    registry(scope, 0).len()
}

pub fn gradient_checks(scope: GradScope, seed: u64) -> Result<Vec<CheckOutcome>> {
    registry(scope, seed)
        .into_iter()
        .map(|r| {
            let res = grad_check(&r.f, &r.params, FD_EPS, seed)?;
            Ok(CheckOutcome {
                name: r.name,
                scope: r.scope,
                max_rel_err: res.max_rel_err,
                threshold: r.threshold,
                coords: res.coords_checked,
            })
        })
        .collect()
}

/// Worst value of one manifold property over a suite run.
#[derive(Clone, Debug, Serialize)]
pub struct PropertyReport {
    pub name: &'static str,
    pub tolerance: f64,
    pub worst: f64,
    pub failures: usize,
    /// Description of the first failing instance.
    pub first_failure: Option<String>,
}

impl PropertyReport {
    pub fn passed(&self) -> bool {
        self.failures == 0
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SuiteReport {
    pub trials: usize,
    pub seed: u64,
    pub properties: Vec<PropertyReport>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.properties.iter().all(PropertyReport::passed)
    }
}

pub const CURVATURES: [f64; 3] = [-0.5, -1.0, -2.0];
pub const DIMS: [usize; 3] = [2, 8, 16];
/// Sampled points lie within this hyperbolic distance of the origin.
const MAX_RADIUS: f64 = 3.0;
/// Sampled tangent vectors have at most this metric norm.
const MAX_TANGENT: f64 = 2.0;

struct Tracker {
    reports: Vec<PropertyReport>,
}

impl Tracker {
    fn record(&mut self, idx: usize, value: f64, ok: bool, ctx: &dyn Fn() -> String) {
        let r = &mut self.reports[idx];
        r.worst = r.worst.max(value);
        if !ok || !value.is_finite() {
            r.failures += 1;
            if r.first_failure.is_none() {
                r.first_failure = Some(ctx());
            }
        }
    }
}

fn gaussian(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_shape_simple_fn(n, || rng.sample(StandardNormal))
}

fn unit(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    loop {
        let g = gaussian(rng, n);
        let norm = g.dot(&g).sqrt();
        if norm > 1e-9 {
            return g / norm;
        }
    }
}

/// A point at hyperbolic distance `r` from the origin in a random direction.
pub fn random_point(m: &Manifold, r: f64, rng: &mut ChaCha8Rng) -> Point {
    let u = unit(rng, m.dim()) * (r / m.origin_metric_scale());
    let t = m.tangent_at_origin(u.view()).expect("dimension matches");
    m.exp_map(&t).expect("finite tangent")
}

/// A tangent vector at `x` with metric norm `len`.
pub fn random_tangent(m: &Manifold, x: &Point, len: f64, rng: &mut ChaCha8Rng) -> TangentVector {
    let raw = gaussian(rng, m.ambient_dim());
    let mut t = match m.kind() {
        ModelKind::PoincareBall => m.tangent(x, raw).expect("any vector is tangent"),
        ModelKind::Lorentz => m.project_tangent(x, raw.view()).expect("projection"),
    };
    let n = m.metric_norm(&t);
    t.coords *= len / n.max(1e-300);
    t
}

fn max_abs_diff(a: &Array1<f64>, b: &Array1<f64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Runs `trials` random instances per model. Each instance draws a
/// curvature from [`CURVATURES`] and a dimension from [`DIMS`].
pub fn manifold_suite(trials: usize, seed: u64) -> Result<SuiteReport> {
    let mk = |name, tolerance| PropertyReport {
        name,
        tolerance,
        worst: 0.0,
        failures: 0,
        first_failure: None,
    };
    let mut t = Tracker {
        reports: vec![
            mk("exp_log_inversion", 1e-6),
            mk("distance_symmetry", 1e-9),
            mk("distance_identity", 1e-9),
            mk("triangle_inequality_slack", 1e-8),
            mk("transport_norm_preservation", 1e-6),
            mk("lorentz_tangency", 1e-6),
            mk("isometry_distance_preservation", 1e-6),
        ],
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for kind in [ModelKind::PoincareBall, ModelKind::Lorentz] {
        for trial in 0..trials {
            let k = CURVATURES[rng.random_range(0..CURVATURES.len())];
            let n = DIMS[rng.random_range(0..DIMS.len())];
            let m = Manifold::new(kind, k, n)?;
            let ctx = |extra: &str| format!("{} K={k} n={n} trial={trial} seed={seed}: {extra}", kind.name());
            let [rx, ry, rz] = [0; 3].map(|_| rng.random_range(0.0..MAX_RADIUS));
            let x = random_point(&m, rx, &mut rng);
            let y = random_point(&m, ry, &mut rng);
            let z = random_point(&m, rz, &mut rng);
            let v = random_tangent(&m, &x, rng.random_range(0.0..MAX_TANGENT), &mut rng);

            // exp/log round trips in both directions, relative to the scale of the inputs
            let back = m.log_map(&x, &m.exp_map(&v)?)?;
            let e1 = max_abs_diff(&back.coords, &v.coords) / v.coords.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
            let again = m.exp_map(&m.log_map(&x, &y)?)?;
            let e2 = max_abs_diff(&again.coords, &y.coords) / y.coords.iter().fold(1.0_f64, |a, b| a.max(b.abs()));
            let e = e1.max(e2);
            t.record(0, e, e <= 1e-6, &|| ctx(&format!("x={:?} v={:?} y={:?} err={e:e}", x.coords, v.coords, y.coords)));

            let dxy = m.distance(&x, &y)?;
            let dyx = m.distance(&y, &x)?;
            let e = (dxy - dyx).abs();
            t.record(1, e, e <= 1e-9, &|| ctx(&format!("x={:?} y={:?} d={dxy} vs {dyx}", x.coords, y.coords)));
            let e = m.distance(&x, &x)?.abs();
            t.record(2, e, e <= 1e-9, &|| ctx(&format!("x={:?} d(x,x)={e:e}", x.coords)));

            let slack = dxy + m.distance(&y, &z)? - m.distance(&x, &z)?;
            t.record(3, (-slack).max(0.0), slack >= -1e-8, &|| {
                ctx(&format!("x={:?} y={:?} z={:?} slack={slack:e}", x.coords, y.coords, z.coords))
            });

            let pv = m.parallel_transport(&x, &y, &v)?;
            let e = (m.metric_norm(&pv) - m.metric_norm(&v)).abs();
            t.record(4, e, e <= 1e-6, &|| ctx(&format!("x={:?} y={:?} v={:?} err={e:e}", x.coords, y.coords, v.coords)));

            if kind == ModelKind::Lorentz {
                let l = m.log_map(&x, &y)?;
                let e = manifold::lorentz_inner(x.coords.view(), l.coords.view())?
                    .abs()
                    .max(manifold::lorentz_inner(y.coords.view(), pv.coords.view())?.abs());
                t.record(5, e, e <= 1e-6, &|| ctx(&format!("x={:?} y={:?} err={e:e}", x.coords, y.coords)));
            }

            let (xo, yo) = match kind {
                ModelKind::PoincareBall => (manifold::to_lorentz(&x)?, manifold::to_lorentz(&y)?),
                ModelKind::Lorentz => (manifold::to_poincare(&x)?, manifold::to_poincare(&y)?),
            };
            let e = (xo.manifold.distance(&xo, &yo)? - dxy).abs();
            t.record(6, e, e <= 1e-6, &|| ctx(&format!("x={:?} y={:?} err={e:e}", x.coords, y.coords)));
        }
    }
    Ok(SuiteReport {
        trials,
        seed,
        properties: t.reports,
    })
}
