//! Poincaré ball and Lorentz (hyperboloid) models of hyperbolic space.
//!
//! Every operation here is a pure function of its arguments and works in
//! `f64`. A [`Manifold`] is a small `Copy` value (model kind, curvature,
//! intrinsic dimension) acting as the namespace for the geometry; [`Point`]
//! and [`TangentVector`] carry their manifold so mixing spaces is caught.
//!
//! Conventions:
//! - curvature `K < 0`, and `c = -K` is used internally;
//! - a Poincaré point has `n` coordinates and satisfies `‖x‖² < 1/c`;
//! - a Lorentz point has `n + 1` coordinates, `⟨x, x⟩_L = 1/K` and `x₀ > 0`;
//! - a Poincaré tangent vector is stored in Euclidean coordinates, its metric
//!   norm is `λ_x ‖v‖` with the conformal factor `λ_x = 2 / (1 + K‖x‖²)`.

use ndarray::{Array1, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest admissible artanh argument.
pub const ARTANH_MAX: f64 = 1.0 - 1e-12;
/// Poincaré points are kept within `(1 - BALL_MARGIN) / √c` of the origin.
pub const BALL_MARGIN: f64 = 1e-5;
/// Below this distance `log_map` returns the zero vector.
pub const LOG_ZERO_DIST: f64 = 1e-12;
/// Tolerance for the hyperboloid constraint and Lorentz tangency.
pub const CONSTRAINT_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    PoincareBall,
    Lorentz,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::PoincareBall => "poincare",
            ModelKind::Lorentz => "lorentz",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poincare" | "poincare_ball" | "ball" => Ok(ModelKind::PoincareBall),
            "lorentz" | "hyperboloid" => Ok(ModelKind::Lorentz),
            other => Err(Error::Config(format!("unknown model kind `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifold {
    kind: ModelKind,
    curvature: f64,
    dim: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Point {
    pub coords: Array1<f64>,
    pub manifold: Manifold,
}

/// A tangent vector in ambient coordinates together with its base point.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    pub coords: Array1<f64>,
    pub base: Point,
}

/// `λ_x^K = 2 / (1 + K‖x‖²)`, strictly positive inside the ball.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct ConformalFactor(pub f64);

impl ConformalFactor {
    pub fn value(self) -> f64 {
        self.0
    }
}

/// `⟨x, y⟩_L = -x₀y₀ + Σ xᵢyᵢ`.
pub fn lorentz_inner(x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            got: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.len(),
        });
    }
    Ok(minkowski(x, y))
}

fn minkowski(x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
    let mut acc = -x[0] * y[0];
    for i in 1..x.len() {
        acc += x[i] * y[i];
    }
    acc
}

fn norm_sq(x: ArrayView1<f64>) -> f64 {
    x.dot(&x)
}

/// `acosh(1 + z)` for `z ≥ 0`, accurate when `z` is tiny.
pub(crate) fn acosh1p(z: f64) -> f64 {
    let z = z.max(0.0);
    (z + (z * (z + 2.0)).sqrt()).ln_1p()
}

pub(crate) fn artanh_clamped(x: f64) -> f64 {
    x.clamp(-ARTANH_MAX, ARTANH_MAX).atanh()
}

/// Raw Möbius addition with curvature `k < 0`; no boundary check.
pub(crate) fn mobius_add_raw(k: f64, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Array1<f64> {
    let xy = x.dot(&y);
    let x2 = norm_sq(x);
    let y2 = norm_sq(y);
    let num_x = 1.0 - 2.0 * k * xy - k * y2;
    let num_y = 1.0 + k * x2;
    let den = 1.0 - 2.0 * k * xy + k * k * x2 * y2;
    (&x * num_x + &y * num_y) / den
}

/// Closed-form gyration `gyr[u, v] w` for curvature `k < 0`.
pub(crate) fn gyration_raw(
    k: f64,
    u: ArrayView1<f64>,
    v: ArrayView1<f64>,
    w: ArrayView1<f64>,
) -> Array1<f64> {
    let u2 = norm_sq(u);
    let v2 = norm_sq(v);
    let uv = u.dot(&v);
    let uw = u.dot(&w);
    let vw = v.dot(&w);
    let k2 = k * k;
    let a = -k2 * uw * v2 - k * vw + 2.0 * k2 * uv * vw;
    let b = -k2 * vw * u2 + k * uw;
    let d = 1.0 - 2.0 * k * uv + k2 * u2 * v2;
    &w + &((&u * a + &v * b) * (2.0 / d))
}

impl Manifold {
    pub fn new(kind: ModelKind, curvature: f64, dim: usize) -> Result<Self> {
        if !(curvature < 0.0) || !curvature.is_finite() {
            return Err(Error::InvalidCurvature(curvature));
        }
        if dim == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            kind,
            curvature,
            dim,
        })
    }

    pub fn poincare(curvature: f64, dim: usize) -> Result<Self> {
        Self::new(ModelKind::PoincareBall, curvature, dim)
    }

    pub fn lorentz(curvature: f64, dim: usize) -> Result<Self> {
        Self::new(ModelKind::Lorentz, curvature, dim)
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn curvature(&self) -> f64 {
        self.curvature
    }

    /// `c = -K`.
    pub fn c(&self) -> f64 {
        -self.curvature
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ambient_dim(&self) -> usize {
        match self.kind {
            ModelKind::PoincareBall => self.dim,
            ModelKind::Lorentz => self.dim + 1,
        }
    }

    /// Same model and curvature, different intrinsic dimension.
    pub fn with_dim(&self, dim: usize) -> Result<Self> {
        Self::new(self.kind, self.curvature, dim)
    }

    /// Largest Euclidean norm a Poincaré point is allowed to have.
    pub fn max_ball_norm(&self) -> f64 {
        (1.0 - BALL_MARGIN) / self.c().sqrt()
    }

    /// The origin: `0` in the ball, `(1/√c, 0, …, 0)` on the hyperboloid.
    pub fn origin(&self) -> Point {
        let mut coords = Array1::zeros(self.ambient_dim());
        if self.kind == ModelKind::Lorentz {
            coords[0] = 1.0 / self.c().sqrt();
        }
        Point {
            coords,
            manifold: *self,
        }
    }

    /// Validates `coords` and wraps them as a point.
    pub fn point(&self, coords: Array1<f64>) -> Result<Point> {
        self.check_coords(coords.view())?;
        Ok(Point {
            coords,
            manifold: *self,
        })
    }

    /// Wraps coordinates without validation. Callers own the invariant.
    pub fn point_unchecked(&self, coords: Array1<f64>) -> Point {
        Point {
            coords,
            manifold: *self,
        }
    }

    pub fn check_coords(&self, x: ArrayView1<f64>) -> Result<()> {
        if x.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::OffManifold("non-finite coordinate".into()));
        }
        match self.kind {
            ModelKind::PoincareBall => {
                let n2 = norm_sq(x);
                if n2 * self.c() >= 1.0 {
                    return Err(Error::OffManifold(format!(
                        "‖x‖² = {n2} is outside the ball of radius² {}",
                        1.0 / self.c()
                    )));
                }
            }
            ModelKind::Lorentz => {
                if x[0] <= 0.0 {
                    return Err(Error::OffManifold("x₀ must be positive".into()));
                }
                let residual = self.curvature * minkowski(x, x) - 1.0;
                let scale = 1.0 + self.c() * norm_sq(x);
                if residual.abs() > CONSTRAINT_TOL * scale {
                    return Err(Error::OffManifold(format!(
                        "K⟨x,x⟩_L - 1 = {residual:e}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Builds a tangent vector at `base`, checking Lorentz tangency.
    pub fn tangent(&self, base: &Point, coords: Array1<f64>) -> Result<TangentVector> {
        self.same(base)?;
        if coords.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: coords.len(),
            });
        }
        if self.kind == ModelKind::Lorentz {
            self.check_tangency(base.coords.view(), coords.view())?;
        }
        Ok(TangentVector {
            coords,
            base: base.clone(),
        })
    }

    fn check_tangency(&self, x: ArrayView1<f64>, v: ArrayView1<f64>) -> Result<()> {
        let residual = minkowski(x, v);
        let scale = 1.0 + norm_sq(x).sqrt() * norm_sq(v).sqrt();
        if residual.abs() > CONSTRAINT_TOL * scale {
            return Err(Error::NotTangent(residual));
        }
        Ok(())
    }

    fn same(&self, p: &Point) -> Result<()> {
        if p.manifold != *self {
            return Err(Error::ManifoldMismatch);
        }
        Ok(())
    }

    fn require(&self, kind: ModelKind, op: &'static str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::WrongModel {
                op,
                expected: kind.name(),
            });
        }
        Ok(())
    }

    pub fn conformal_factor(&self, x: &Point) -> Result<ConformalFactor> {
        self.require(ModelKind::PoincareBall, "conformal_factor")?;
        self.same(x)?;
        Ok(ConformalFactor(self.lambda(x.coords.view())))
    }

    fn lambda(&self, x: ArrayView1<f64>) -> f64 {
        2.0 / (1.0 + self.curvature * norm_sq(x))
    }

    /// Möbius addition `x ⊕_K y` in the ball.
    pub fn mobius_add(&self, x: &Point, y: &Point) -> Result<Point> {
        self.require(ModelKind::PoincareBall, "mobius_add")?;
        self.same(x)?;
        self.same(y)?;
        let r = mobius_add_raw(self.curvature, x.coords.view(), y.coords.view());
        if r.iter().any(|v| !v.is_finite()) || norm_sq(r.view()) * self.c() >= 1.0 - 1e-15 {
            return Err(Error::BoundaryOverflow("mobius_add"));
        }
        Ok(self.point_unchecked(r))
    }

    /// Gyration `gyr[x, y] v`; preserves the Euclidean norm of `v`.
    pub fn gyration(&self, x: &Point, y: &Point, v: ArrayView1<f64>) -> Result<Array1<f64>> {
        self.require(ModelKind::PoincareBall, "gyration")?;
        self.same(x)?;
        self.same(y)?;
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        Ok(gyration_raw(
            self.curvature,
            x.coords.view(),
            y.coords.view(),
            v,
        ))
    }

    /// Geodesic distance.
    pub fn distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.same(x)?;
        self.same(y)?;
        Ok(self.distance_raw(x.coords.view(), y.coords.view()))
    }

    pub(crate) fn distance_raw(&self, x: ArrayView1<f64>, y: ArrayView1<f64>) -> f64 {
        let c = self.c();
        let z = match self.kind {
            // argument of acosh minus one: 2c‖x-y‖² / ((1-c‖x‖²)(1-c‖y‖²))
            ModelKind::PoincareBall => {
                let diff = &x - &y;
                let num = 2.0 * c * norm_sq(diff.view());
                let den = (1.0 - c * norm_sq(x)) * (1.0 - c * norm_sq(y));
                num / den
            }
            // K⟨x,y⟩_L - 1 = (c/2)⟨x-y, x-y⟩_L on the hyperboloid
            ModelKind::Lorentz => {
                let diff = &x - &y;
                0.5 * c * minkowski(diff.view(), diff.view())
            }
        };
        acosh1p(z) / c.sqrt()
    }

    /// Riemannian norm of a tangent vector at its base point.
    pub fn metric_norm(&self, v: &TangentVector) -> f64 {
        match self.kind {
            ModelKind::PoincareBall => {
                self.lambda(v.base.coords.view()) * norm_sq(v.coords.view()).sqrt()
            }
            ModelKind::Lorentz => minkowski(v.coords.view(), v.coords.view()).max(0.0).sqrt(),
        }
    }

    /// Pulls coordinates back onto the manifold: Poincaré points are shrunk
    /// to `max_ball_norm`, Lorentz points get `x₀ = √(‖x_{1:n}‖² + 1/c)`.
    pub fn project(&self, mut x: Array1<f64>) -> Array1<f64> {
        match self.kind {
            ModelKind::PoincareBall => {
                let n = norm_sq(x.view()).sqrt();
                let max = self.max_ball_norm();
                if n > max {
                    x *= max / n;
                }
            }
            ModelKind::Lorentz => {
                let s2: f64 = x.iter().skip(1).map(|v| v * v).sum();
                x[0] = (s2 + 1.0 / self.c()).sqrt();
            }
        }
        x
    }

    /// `v - K⟨x,v⟩_L x`, the orthogonal projection onto `T_x ℍ`.
    pub fn project_tangent(&self, x: &Point, v: ArrayView1<f64>) -> Result<TangentVector> {
        self.require(ModelKind::Lorentz, "project_tangent")?;
        self.same(x)?;
        if v.len() != self.ambient_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.ambient_dim(),
                got: v.len(),
            });
        }
        Ok(TangentVector {
            coords: self.project_tangent_raw(x.coords.view(), v),
            base: x.clone(),
        })
    }

    fn project_tangent_raw(&self, x: ArrayView1<f64>, v: ArrayView1<f64>) -> Array1<f64> {
        let coef = self.curvature * minkowski(x, v);
        &v - &(&x * coef)
    }

    pub fn exp_map(&self, v: &TangentVector) -> Result<Point> {
        self.same(&v.base)?;
        let x = v.base.coords.view();
        let c = self.c();
        let sc = c.sqrt();
        let out = match self.kind {
            ModelKind::PoincareBall => {
                let r = norm_sq(v.coords.view()).sqrt();
                if r == 0.0 {
                    return Ok(v.base.clone());
                }
                let scale = (sc * self.lambda(x) * r / 2.0).tanh() / (sc * r);
                let second = &v.coords * scale;
                self.project(mobius_add_raw(self.curvature, x, second.view()))
            }
            ModelKind::Lorentz => {
                self.check_tangency(x, v.coords.view())?;
                let r = minkowski(v.coords.view(), v.coords.view()).max(0.0).sqrt();
                if r == 0.0 {
                    return Ok(v.base.clone());
                }
                let t = sc * r;
                let y = &x * t.cosh() + &(&v.coords * (t.sinh() / t));
                self.project(y)
            }
        };
        if out.iter().any(|v| !v.is_finite()) {
            return Err(Error::BoundaryOverflow("exp_map"));
        }
        Ok(self.point_unchecked(out))
    }

    pub fn log_map(&self, base: &Point, y: &Point) -> Result<TangentVector> {
        self.same(base)?;
        self.same(y)?;
        let x = base.coords.view();
        let d = self.distance_raw(x, y.coords.view());
        if d < LOG_ZERO_DIST {
            return Ok(TangentVector {
                coords: Array1::zeros(self.ambient_dim()),
                base: base.clone(),
            });
        }
        let sc = self.c().sqrt();
        let coords = match self.kind {
            ModelKind::PoincareBall => {
                let neg_x = x.mapv(|v| -v);
                let u = mobius_add_raw(self.curvature, neg_x.view(), y.coords.view());
                let nu = norm_sq(u.view()).sqrt();
                let scale = 2.0 / (sc * self.lambda(x)) * artanh_clamped(sc * nu) / nu;
                u * scale
            }
            ModelKind::Lorentz => {
                // θ = √c·d, α = cosh θ = K⟨x,y⟩_L
                let theta = sc * d;
                let alpha = theta.cosh();
                let dir = &y.coords - &(&x * alpha);
                let v = dir * (theta / theta.sinh());
                self.project_tangent_raw(x, v.view())
            }
        };
        Ok(TangentVector {
            coords,
            base: base.clone(),
        })
    }

    pub fn parallel_transport(&self, x: &Point, y: &Point, v: &TangentVector) -> Result<TangentVector> {
        self.same(x)?;
        self.same(y)?;
        if v.base != *x {
            return Err(Error::ManifoldMismatch);
        }
        let coords = match self.kind {
            ModelKind::PoincareBall => {
                let neg_x = x.coords.mapv(|a| -a);
                let g = gyration_raw(
                    self.curvature,
                    y.coords.view(),
                    neg_x.view(),
                    v.coords.view(),
                );
                g * (self.lambda(x.coords.view()) / self.lambda(y.coords.view()))
            }
            ModelKind::Lorentz => {
                let k = self.curvature;
                let yv = minkowski(y.coords.view(), v.coords.view());
                let xy = minkowski(x.coords.view(), y.coords.view());
                let coef = k * yv / (1.0 + k * xy);
                let sum = &x.coords + &y.coords;
                let out = &v.coords - &(sum * coef);
                self.project_tangent_raw(y.coords.view(), out.view())
            }
        };
        Ok(TangentVector {
            coords,
            base: y.clone(),
        })
    }

    /// Treats `v` (intrinsic coordinates, length `dim`) as a tangent vector
    /// at the origin. For Lorentz a zero time coordinate is prepended.
    pub fn tangent_at_origin(&self, v: ArrayView1<f64>) -> Result<TangentVector> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: v.len(),
            });
        }
        let coords = match self.kind {
            ModelKind::PoincareBall => v.to_owned(),
            ModelKind::Lorentz => {
                let mut c = Array1::zeros(self.dim + 1);
                c.slice_mut(ndarray::s![1..]).assign(&v);
                c
            }
        };
        Ok(TangentVector {
            coords,
            base: self.origin(),
        })
    }

    /// Intrinsic coordinates of a tangent vector at the origin (drops the
    /// Lorentz time coordinate, which is zero there).
    pub fn origin_tangent_coords(&self, v: &TangentVector) -> Array1<f64> {
        match self.kind {
            ModelKind::PoincareBall => v.coords.clone(),
            ModelKind::Lorentz => v.coords.slice(ndarray::s![1..]).to_owned(),
        }
    }

    /// Metric norm of a tangent vector at the origin given in intrinsic
    /// coordinates: `2‖v‖` in the ball (`λ_0 = 2`), `‖v‖` on the hyperboloid.
    pub fn origin_metric_scale(&self) -> f64 {
        match self.kind {
            ModelKind::PoincareBall => 2.0,
            ModelKind::Lorentz => 1.0,
        }
    }
}

/// Isometry from the Poincaré ball onto the hyperboloid of the same curvature.
pub fn to_lorentz(p: &Point) -> Result<Point> {
    let m = p.manifold;
    m.require(ModelKind::PoincareBall, "to_lorentz")?;
    let c = m.c();
    let x = p.coords.view();
    let a = c * norm_sq(x);
    if !(1.0 - a > 1e-15) {
        return Err(Error::BoundaryOverflow("to_lorentz"));
    }
    let target = Manifold::lorentz(m.curvature, m.dim)?;
    let mut out = Array1::zeros(m.dim + 1);
    out[0] = (1.0 + a) / ((1.0 - a) * c.sqrt());
    out.slice_mut(ndarray::s![1..]).assign(&(&x * (2.0 / (1.0 - a))));
    Ok(target.point_unchecked(out))
}

/// Inverse of [`to_lorentz`].
pub fn to_poincare(p: &Point) -> Result<Point> {
    let m = p.manifold;
    m.require(ModelKind::Lorentz, "to_poincare")?;
    let target = Manifold::poincare(m.curvature, m.dim)?;
    let den = 1.0 + m.c().sqrt() * p.coords[0];
    let out = p.coords.slice(ndarray::s![1..]).mapv(|v| v / den);
    Ok(target.point_unchecked(out))
}

/// Moves `h` to `target` through the tangent spaces at the two origins:
/// `exp_o(rescale(log_o(h)))`, where the rescale adjusts the ambient layout
/// and keeps the metric norm (hence the distance to the origin) unchanged.
pub fn transfer(h: &Point, target: &Manifold) -> Result<Point> {
    let source = h.manifold;
    if source == *target {
        return Ok(h.clone());
    }
    if source.dim != target.dim {
        return Err(Error::DimensionMismatch {
            expected: target.dim,
            got: source.dim,
        });
    }
    let v = source.log_map(&source.origin(), h)?;
    let intrinsic = source.origin_tangent_coords(&v)
        * (source.origin_metric_scale() / target.origin_metric_scale());
    let u = target.tangent_at_origin(intrinsic.view())?;
    target.exp_map(&u)
}
