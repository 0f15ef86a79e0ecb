//! Planar geometry for the finger cross-section: points, unit directions,
//! rays, and the three curve kinds an optical surface can take.
//!
//! All lengths are millimeters. Every type here is immutable after
//! construction.

mod arc;
mod bspline;
mod optics;
mod segment;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

pub use arc::CircularArc;
pub use bspline::BSplineCurve;
pub use optics::{reflect, refract, Refraction};
pub use segment::LineSegment;

/// Smallest ray parameter accepted as a forward hit; keeps a ray from
/// re-hitting the surface it was launched from.
pub const MIN_RAY_T: f64 = 1e-9;

/// Residual (mm) the spline root refinement drives the ray-curve distance below.
pub const INTERSECT_TOL: f64 = 1e-9;

/// Subdivision depth past which a spline intersection is reported degenerate.
pub const MAX_SUBDIVISION_DEPTH: usize = 64;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GeometryError {
    #[error("parameter {t} outside curve domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },
    #[error("degenerate geometry: {0}")]
    Degenerate(String),
    #[error("invalid curve: {0}")]
    InvalidCurve(String),
}

/// A point (or free vector) in the plane, millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x * other.x + self.y * other.y
    }

    /// z-component of the 3-D cross product.
    pub fn cross(self, other: Self) -> f64 {
        self.x * other.y - self.y * other.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> f64 {
        (self - other).norm()
    }

    pub fn lerp(self, other: Self, u: f64) -> Self {
        self + (other - self) * u
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, rhs: Self) -> Self {
        Point2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, rhs: Self) -> Self {
        Point2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Self {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Self {
        Point2::new(-self.x, -self.y)
    }
}

impl Add<Dir2> for Point2 {
    type Output = Point2;
    fn add(self, rhs: Dir2) -> Self {
        self + rhs.as_vec()
    }
}

/// Unit direction in the plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dir2 {
    x: f64,
    y: f64,
}

impl Dir2 {
    pub const X: Dir2 = Dir2 { x: 1.0, y: 0.0 };
    pub const Y: Dir2 = Dir2 { x: 0.0, y: 1.0 };

    /// Normalizes `(x, y)`; `None` for zero or non-finite input.
    pub fn new(x: f64, y: f64) -> Option<Self> {
        let n = x.hypot(y);
        if n > 0.0 && n.is_finite() {
            Some(Self { x: x / n, y: y / n })
        } else {
            None
        }
    }

    pub fn from_vec(v: Point2) -> Option<Self> {
        Self::new(v.x, v.y)
    }

    pub fn from_angle(radians: f64) -> Self {
        let (s, c) = radians.sin_cos();
        Self { x: c, y: s }
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    pub fn as_vec(self) -> Point2 {
        Point2::new(self.x, self.y)
    }

    pub fn dot(self, other: Dir2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn cross(self, other: Dir2) -> f64 {
        self.x * other.y - self.y * other.x
    }

    /// Counter-clockwise rotation by 90°.
    pub fn perp(self) -> Dir2 {
        Dir2 { x: -self.y, y: self.x }
    }

    pub fn rotated(self, radians: f64) -> Dir2 {
        let (s, c) = radians.sin_cos();
        // Renormalize so repeated rotation never drifts off the unit circle.
        Dir2::new(c * self.x - s * self.y, s * self.x + c * self.y).unwrap_or(self)
    }

    pub fn angle(self) -> f64 {
        self.y.atan2(self.x)
    }

    /// Signed angle (radians, counter-clockwise positive) from `self` to `other`.
    pub fn angle_to(self, other: Dir2) -> f64 {
        self.cross(other).atan2(self.dot(other))
    }
}

impl Neg for Dir2 {
    type Output = Dir2;
    fn neg(self) -> Dir2 {
        Dir2 { x: -self.x, y: -self.y }
    }
}

impl Mul<f64> for Dir2 {
    type Output = Point2;
    fn mul(self, rhs: f64) -> Point2 {
        Point2::new(self.x * rhs, self.y * rhs)
    }
}

/// A half-line travelling through a medium of the given refractive index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ray {
    pub origin: Point2,
    pub direction: Dir2,
    pub medium_index: f64,
}

impl Ray {
    pub fn new(origin: Point2, direction: Dir2, medium_index: f64) -> Self {
        debug_assert!(medium_index >= 1.0);
        Self { origin, direction, medium_index }
    }

    pub fn at(&self, t: f64) -> Point2 {
        self.origin + self.direction * t
    }

    /// Coordinates of `p` in the ray frame: (distance along, signed offset to the left).
    pub(crate) fn local(&self, p: Point2) -> (f64, f64) {
        let v = p - self.origin;
        (self.direction.as_vec().dot(v), self.direction.as_vec().cross(v))
    }
}

/// A forward ray/surface intersection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    /// Distance travelled along the ray (mm).
    pub t_ray: f64,
    /// Curve parameter at the hit.
    pub t_surface: f64,
    pub point: Point2,
}

/// Geometry of one optical surface.
#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Spline(BSplineCurve),
    Arc(CircularArc),
    Segment(LineSegment),
}

impl Shape {
    /// Nearest forward intersection with `ray`, if any.
    pub fn intersect(&self, ray: &Ray) -> Result<Option<Hit>, GeometryError> {
        match self {
            Shape::Spline(c) => c.intersect(ray),
            Shape::Arc(a) => Ok(a.intersect(ray)),
            Shape::Segment(s) => Ok(s.intersect(ray)),
        }
    }

    /// Unit tangent and left normal at curve parameter `t`.
    pub fn tangent_normal(&self, t: f64) -> Result<(Dir2, Dir2), GeometryError> {
        match self {
            Shape::Spline(c) => c.tangent_normal(t),
            Shape::Arc(a) => Ok(a.tangent_normal(t)),
            Shape::Segment(s) => Ok(s.tangent_normal()),
        }
    }

    pub fn point_at(&self, t: f64) -> Result<Point2, GeometryError> {
        match self {
            Shape::Spline(c) => c.evaluate(t),
            Shape::Arc(a) => Ok(a.point_at(t)),
            Shape::Segment(s) => Ok(s.point_at(t)),
        }
    }

    /// Polyline approximation for drawing and bounding boxes.
    pub fn sample(&self, n: usize) -> Vec<Point2> {
        let n = n.max(2);
        match self {
            Shape::Spline(c) => {
                let (lo, hi) = c.domain();
                (0..n)
                    .map(|i| {
                        let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                        c.evaluate(t).expect("sampled inside domain")
                    })
                    .collect()
            }
            Shape::Arc(a) => (0..n).map(|i| a.point_at(a.span() * i as f64 / (n - 1) as f64)).collect(),
            Shape::Segment(s) => vec![s.start(), s.end()],
        }
    }
}
