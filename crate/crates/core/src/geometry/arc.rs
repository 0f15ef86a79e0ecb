use std::f64::consts::TAU;

use super::{Dir2, GeometryError, Hit, Point2, Ray, MIN_RAY_T};

/// Counter-clockwise circular arc starting at `start_angle`.
///
/// The curve parameter is the angle swept from the start, in radians.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CircularArc {
    center: Point2,
    radius: f64,
    start_angle: f64,
    span: f64,
}

impl CircularArc {
    pub fn new(center: Point2, radius: f64, start_angle: f64, span: f64) -> Result<Self, GeometryError> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(GeometryError::InvalidCurve(format!("arc radius must be positive, got {radius}")));
        }
        if !(span > 0.0 && span <= TAU) {
            return Err(GeometryError::InvalidCurve(format!("arc span must be in (0, 2π], got {span}")));
        }
        if !center.is_finite() || !start_angle.is_finite() {
            return Err(GeometryError::InvalidCurve("arc center and start angle must be finite".into()));
        }
        Ok(Self { center, radius, start_angle, span })
    }

    pub fn center(&self) -> Point2 {
        self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn start_angle(&self) -> f64 {
        self.start_angle
    }

    pub fn span(&self) -> f64 {
        self.span
    }

    pub fn point_at(&self, t: f64) -> Point2 {
        let (s, c) = (self.start_angle + t).sin_cos();
        self.center + Point2::new(c, s) * self.radius
    }

    /// Tangent along increasing angle; the normal points at the center.
    pub fn tangent_normal(&self, t: f64) -> (Dir2, Dir2) {
        let radial = Dir2::from_angle(self.start_angle + t);
        let tangent = radial.perp();
        (tangent, tangent.perp())
    }

    /// Swept angle of `p` from the start, in [0, 2π).
    fn param_of(&self, p: Point2) -> f64 {
        let v = p - self.center;
        (v.y.atan2(v.x) - self.start_angle).rem_euclid(TAU)
    }

    pub fn intersect(&self, ray: &Ray) -> Option<Hit> {
        let oc = ray.origin - self.center;
        let b = ray.direction.as_vec().dot(oc);
        let c = oc.dot(oc) - self.radius * self.radius;
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let root = disc.sqrt();
        // Cancellation-free pair of roots of t² + 2bt + c = 0.
        let q = -b - b.signum() * root;
        let (mut t1, mut t2) = if q != 0.0 { (q, c / q) } else { (-b, -b) };
        if t1 > t2 {
            std::mem::swap(&mut t1, &mut t2);
        }
        for t in [t1, t2] {
            if t <= MIN_RAY_T {
                continue;
            }
            let point = ray.at(t);
            let param = self.param_of(point);
            // Accept hits within rounding of either end of the span.
            let param = if param > self.span && TAU - param < 1e-12 { 0.0 } else { param };
            if param <= self.span + 1e-12 {
                return Some(Hit { t_ray: t, t_surface: param.min(self.span), point });
            }
        }
        None
    }
}
